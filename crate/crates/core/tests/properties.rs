use std::collections::BTreeMap;

use proptest::prelude::*;
use spical::ast::{alpha_equal, Name, Program};
use spical::equivalence::{check, replay, validate_relation, CheckConfig, Game, SuspensionKind, Verdict};
use spical::lts::{canonical, Bounds, CanonMode, Universe};
use spical::random::{vocabulary, Generator, Limits};
use spical::typecheck::TypedFile;

const SMALL: Limits = Limits {
    max_par: 2,
    max_new: 1,
    depth: 1,
};

fn programs(voc: &TypedFile, seed: u64) -> (Program, Program) {
    let mut g = Generator::new(voc.env.clone(), seed).with_limits(SMALL);
    (g.program(), g.program())
}

fn cfg() -> CheckConfig {
    CheckConfig {
        bounds: Bounds {
            max_states: 2_000,
            ..Bounds::default()
        },
        max_pairs: 5_000,
        ..CheckConfig::default()
    }
}

fn verdict(game: Game, p: &Program, q: &Program, voc: &TypedFile) -> Verdict {
    check(game, p, q, &voc.defs, &Universe::new(voc.env.clone()), cfg()).unwrap()
}

const GAMES: [Game; 4] = [
    Game::Strong,
    Game::Labelled(SuspensionKind::Immediate),
    Game::Labelled(SuspensionKind::Labelled),
    Game::Barbed(SuspensionKind::Labelled),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn alpha_equality_is_an_equivalence(seed in any::<u64>()) {
        let voc = vocabulary();
        let (p, q) = programs(&voc, seed);
        let p1 = p.canonical_alpha();
        let p2 = p1.canonical_alpha_from(1000);
        prop_assert!(alpha_equal(&p, &p));
        prop_assert!(alpha_equal(&p, &p1) && alpha_equal(&p1, &p));
        prop_assert!(alpha_equal(&p1, &p2) && alpha_equal(&p, &p2));
        prop_assert_eq!(alpha_equal(&p, &q), alpha_equal(&q, &p));
    }

    #[test]
    fn canonical_forms_are_idempotent_and_strongly_bisimilar(seed in any::<u64>()) {
        let voc = vocabulary();
        let (p, _) = programs(&voc, seed);
        let c = canonical(&p, CanonMode::Structural);
        prop_assert_eq!(canonical(&c, CanonMode::Structural), c.clone());
        let mut alpha = cfg();
        alpha.bounds.mode = CanonMode::Alpha;
        let v = check(Game::Strong, &p, &c, &voc.defs, &Universe::new(voc.env.clone()), alpha).unwrap();
        prop_assert!(!v.is_inequivalent(), "{} vs {}: {}", p, c, v);
    }

    #[test]
    fn games_are_reflexive_and_symmetric(seed in any::<u64>()) {
        let voc = vocabulary();
        let (p, q) = programs(&voc, seed);
        for g in GAMES {
            prop_assert!(!verdict(g, &p, &p, &voc).is_inequivalent());
            let (pq, qp) = (verdict(g, &p, &q, &voc), verdict(g, &q, &p, &voc));
            if pq.is_equivalent() || pq.is_inequivalent() {
                if qp.is_equivalent() || qp.is_inequivalent() {
                    prop_assert_eq!(pq.kind(), qp.kind(), "{} / {} under {}", p, q, g);
                }
            }
        }
    }

    #[test]
    fn games_are_ordered(seed in any::<u64>()) {
        let voc = vocabulary();
        let (p, q) = programs(&voc, seed);
        let strong = verdict(Game::Strong, &p, &q, &voc);
        let labelled = verdict(Game::Labelled(SuspensionKind::Labelled), &p, &q, &voc);
        let barbed = verdict(Game::Barbed(SuspensionKind::Labelled), &p, &q, &voc);
        if strong.is_equivalent() {
            prop_assert!(!labelled.is_inequivalent(), "{} / {}", p, q);
        }
        if labelled.is_equivalent() {
            prop_assert!(!barbed.is_inequivalent(), "{} / {}", p, q);
        }
    }

    #[test]
    fn verdicts_survive_renaming(seed in any::<u64>()) {
        let voc = vocabulary();
        let (p, q) = programs(&voc, seed);
        let swap: BTreeMap<Name, Name> = [(Name::src("a"), Name::src("b")), (Name::src("b"), Name::src("a"))].into();
        let g = Game::Labelled(SuspensionKind::Labelled);
        let before = verdict(g, &p, &q, &voc);
        let after = verdict(g, &p.rename(&swap), &q.rename(&swap), &voc);
        if !matches!(before, Verdict::BoundExceeded { .. }) && !matches!(after, Verdict::BoundExceeded { .. }) {
            prop_assert_eq!(before.kind(), after.kind(), "{} / {}", p, q);
        }
    }

    #[test]
    fn evidence_checks_out(seed in any::<u64>()) {
        let voc = vocabulary();
        let (p, q) = programs(&voc, seed);
        let u = Universe::new(voc.env.clone());
        for g in GAMES {
            match verdict(g, &p, &q, &voc) {
                Verdict::Equivalent { relation, .. } => {
                    prop_assert!(validate_relation(g, &relation, &voc.defs, &u, cfg()).is_ok(), "{} / {} under {}", p, q, g);
                }
                Verdict::Inequivalent { play, .. } => {
                    let r = replay(g, &play, &voc.defs, &u, cfg());
                    prop_assert!(r.is_ok(), "{} / {} under {}: {:?}", p, q, g, r);
                }
                Verdict::BoundExceeded { .. } => {}
            }
        }
    }
}
