#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use disagreement_cli::config::{Overrides, PipelineConfig};
use disagreement_cli::fixture::{self, Fixture, FixtureSpec};

pub fn spec(countries: &[&str]) -> FixtureSpec {
    FixtureSpec { countries: countries.iter().map(|c| c.to_string()).collect(), ..FixtureSpec::default() }
}

/// Writes the fixture into `dir` and returns the path of its config file.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> (Fixture, PathBuf) {
    let f = fixture::build(spec).unwrap();
    fixture::write(&f, spec, dir).unwrap();
    (f, dir.join("config.toml"))
}

pub fn load(config: &Path, out: &Path) -> PipelineConfig {
    PipelineConfig::load(config, &Overrides { out: Some(out.to_path_buf()), ..Overrides::default() }).unwrap()
}

/// Rewrites a config file in place.
pub fn edit_config(path: &Path, f: impl FnOnce(&mut PipelineConfig)) {
    let mut config = PipelineConfig::from_toml(&std::fs::read_to_string(path).unwrap()).unwrap();
    f(&mut config);
    std::fs::write(path, config.to_toml()).unwrap();
}

/// Every regular file below `root`, keyed by `/`-separated relative path.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap();
                let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                out.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Data rows of a CSV file as string fields, header dropped.
pub fn csv_rows(bytes: &[u8]) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_reader(bytes);
    reader.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

/// Compares two CSV texts cell by cell, numbers to `tol` and everything else exactly.
pub fn assert_csv_close(actual: &[u8], expected: &[u8], tol: f64, name: &str) {
    let a = String::from_utf8_lossy(actual);
    let e = String::from_utf8_lossy(expected);
    assert_eq!(a.lines().next(), e.lines().next(), "{name}: header");
    let (ra, re) = (csv_rows(actual), csv_rows(expected));
    assert_eq!(ra.len(), re.len(), "{name}: row count");
    for (i, (x, y)) in ra.iter().zip(&re).enumerate() {
        assert_eq!(x.len(), y.len(), "{name}: row {i} width");
        for (u, v) in x.iter().zip(y) {
            match (u.parse::<f64>(), v.parse::<f64>()) {
                (Ok(p), Ok(q)) => assert!((p - q).abs() <= tol, "{name}: row {i}: {u} vs {v}"),
                _ => assert_eq!(u, v, "{name}: row {i}"),
            }
        }
    }
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Golden files compared against the default fixture's pipeline output.
pub const GOLDEN: [&str; 4] = ["table1.csv", "irf/AT.csv", "irf/AT_models.csv", "ccf/AT.csv"];

/// Compares `tree` with the frozen golden files; `UPDATE_GOLDEN=1` rewrites them instead.
pub fn check_golden(tree: &BTreeMap<String, Vec<u8>>) {
    let dir = golden_dir();
    for name in GOLDEN {
        let actual = tree.get(name).unwrap_or_else(|| panic!("{name} not emitted"));
        let path = dir.join(name.replace('/', "_"));
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&path, actual).unwrap();
            continue;
        }
        let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_csv_close(actual, &expected, 1e-12, name);
    }
}
