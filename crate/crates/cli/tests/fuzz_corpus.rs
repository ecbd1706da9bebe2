//! Replays the checked-in fuzz corpus through the fuzz target invariants.

use std::fs;
use std::path::Path;

use dfcrb_cli::artifacts::Manifest;
use dfcrb_cli::ExperimentConfig;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn config_seeds() {
    let mut accepted = 0;
    for (name, text) in seeds("parse_config") {
        if let Ok(cfg) = ExperimentConfig::parse(&text) {
            accepted += 1;
            cfg.geometry().unwrap_or_else(|e| panic!("{name}: {e}"));
            if let Some(s) = &cfg.sweep {
                s.modes().unwrap();
            }
            if let Some(m) = &cfg.mc {
                m.estimators().unwrap();
            }
        }
    }
    assert!(accepted >= 5);
}

#[test]
fn manifest_seeds() {
    let mut accepted = 0;
    for (name, text) in seeds("parse_manifest") {
        if let Ok(m) = Manifest::parse(&text) {
            accepted += 1;
            assert_eq!(Manifest::parse(&m.to_toml()).unwrap(), m, "{name}");
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn oversized_grids_are_rejected_at_parse_time() {
    let base = "[geometry]\nsubarrays = 2\nelements_per_subarray = 2\nelement_spacing = 0.5\ninterval = 4\n";
    for extra in [
        "[sweep]\npoints_per_decade = 1000000000000\n",
        "[sweep]\nlo = 1e-300\nhi = 1e300\n",
        "[mc]\nseparations = [1.0]\ngrid_points = 1000000000000\n",
        "[up_check]\npoints = 1000000000000\n",
    ] {
        assert!(ExperimentConfig::parse(&format!("{base}{extra}")).is_err(), "{extra}");
    }
}
