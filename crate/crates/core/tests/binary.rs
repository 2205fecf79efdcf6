mod common;

use std::process::Command;

fn tlbench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tlbench"))
}

#[test]
fn exit_codes_distinguish_usage_and_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        common::small_config(&dir.path().join("out")).to_json().unwrap(),
    )
    .unwrap();

    let ok = tlbench().args(["synth", "--config"]).arg(&config).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let missing = tlbench().args(["evaluate", "--config"]).arg(&config).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("run `tlbench train` first"));

    let bad_cmd = tlbench().args(["fit", "--config"]).arg(&config).output().unwrap();
    assert_eq!(bad_cmd.status.code(), Some(2));

    let bad_json = dir.path().join("bad.json");
    std::fs::write(&bad_json, r#"{"trian": {}}"#).unwrap();
    let bad_cfg = tlbench().args(["synth", "--config"]).arg(&bad_json).output().unwrap();
    assert_eq!(bad_cfg.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_cfg.stderr).contains("unknown field `trian`"));

    let no_config = tlbench().arg("synth").output().unwrap();
    assert_eq!(no_config.status.code(), Some(2));
}

#[test]
fn seed_and_out_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        common::small_config(&dir.path().join("ignored")).to_json().unwrap(),
    )
    .unwrap();
    let run = |seed: &str, out: &str| {
        let status = tlbench()
            .args(["synth", "--seed", seed, "--out"])
            .arg(dir.path().join(out))
            .arg("--config")
            .arg(&config)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join(out).join("synth/manifest.csv")).unwrap()
    };
    let a = run("1", "a");
    let b = run("1", "b");
    let c = run("2", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn staging_dir_follows_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = common::small_config(&dir.path().join("out"));
    c.synth.countries = vec![("A".into(), 1.0)];
    c.pipeline.balancing = Some(tlbench::cli::BalancingSection {
        targets: [
            (tlbench::data_model::Label::Covid, 80),
            (tlbench::data_model::Label::Normal, 80),
        ]
        .into(),
        allow_downsampling: false,
    });
    let config = dir.path().join("run.json");
    std::fs::write(&config, c.to_json().unwrap()).unwrap();
    let staging = dir.path().join("elsewhere");
    for cmd in ["synth", "curate"] {
        let out = tlbench()
            .args([cmd, "--config"])
            .arg(&config)
            .env(tlbench::cli::STAGING_ENV, &staging)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(staging.join("augmented/A/covid").is_dir());
    assert!(!dir.path().join("out/staging").exists());
}
