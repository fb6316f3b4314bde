use std::io::Write;
use std::process::{Command, Output};

fn spical(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spical"))
        .args(args)
        .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/examples"))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn enumerate_prints_both_orders() {
    let o = spical(&["run", "instant.spi", "--max-instants", "1", "--enumerate"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("B([v1; v2])"), "{out}");
    assert!(out.contains("B([v2; v1])"), "{out}");
}

#[test]
fn reader_is_equivalent_to_nil() {
    let o = spical(&["check", "labelled", "reader.spi", "nil.spi", "--susp", "labelled"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("Equivalent"));
}

#[test]
fn parse_errors_exit_3_with_location() {
    let o = spical(&["parse", "garbage.spi"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("garbage.spi:1:"));
    assert_eq!(spical(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(spical(&["check", "weird", "a.spi", "b.spi"]).status.code(), Some(3));
}

#[test]
fn exit_codes_follow_verdicts() {
    let o = spical(&["check", "labelled", "deref_left.spi", "deref_right.spi", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "inequivalent");
    let o = spical(&["check", "labelled", "deref_left.spi", "deref_right.spi", "--contexts", "empty"]);
    assert_eq!(o.status.code(), Some(0));
    let o = spical(&["check", "labelled", "extrusion_left.spi", "extrusion_right.spi", "--state-bound", "20"]);
    assert_eq!(o.status.code(), Some(2));
    let o = spical(&["suspends", "extrusion_left.spi", "--susp", "weak"]);
    assert_eq!(o.status.code(), Some(1));
    let o = spical(&["suspends", "extrusion_left.spi", "--susp", "labelled"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn scripts_inject_emissions() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "s!").unwrap();
    let path = f.path().to_str().unwrap().to_string();
    let o = spical(&["run", "barbed_left.spi", "--script", &path, "--json", "--max-instants", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["instants"][0]["injected"][0], "s!");
    assert!(v["instants"][0]["suspended"].as_str().unwrap().contains("s1!"));
}

#[test]
fn dumps_and_instants_are_json() {
    let o = spical(&["lts-dump", "barbed_left.spi", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 2);
    let o = spical(&["next-instants", "judgement.spi", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["next"].as_array().unwrap().len(), 2);
    let o = spical(&["check-types", "deref_left.spi", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["signals"]["s2"], "sig(unit)");
}

#[test]
fn probe_reports_alarms() {
    let o = spical(&["probe-congruence", "barbed_left.spi", "barbed_right.spi", "--game", "barbed", "--samples", "10", "--seed", "1", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["checked"], 10);
    let again = spical(&["probe-congruence", "barbed_left.spi", "barbed_right.spi", "--game", "barbed", "--samples", "10", "--seed", "1", "--json"]);
    assert_eq!(o.stdout, again.stdout);
}
