use std::path::Path;

use bdris_est::config::SystemConfig;

fn shipped(name: &str) -> SystemConfig {
    SystemConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).expect("shipped config loads")
}

#[test]
fn shipped_configs_match_the_presets() {
    assert_eq!(shipped("desk.toml"), SystemConfig::desk());
    assert_eq!(shipped("full.toml"), SystemConfig::full_scale());
}

#[test]
fn toml_round_trip_preserves_every_field() {
    let mut c = SystemConfig::desk();
    c.seed = 123;
    c.channel.snr_db = None;
    c.channel.on_grid = true;
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    std::fs::write(&p, c.to_toml_string()).unwrap();
    assert_eq!(SystemConfig::load(&p).unwrap(), c);
}

#[test]
fn invalid_group_count_is_rejected_on_load() {
    let mut text = SystemConfig::desk().to_toml_string();
    text = text.replace("groups = 4", "groups = 3");
    let err = SystemConfig::from_toml_str(&text).unwrap_err();
    assert_eq!(err.kind(), "config");
}
