//! Shared helpers for integration tests: a synthetic dataset generator
//! that mimics the N-BaIoT on-disk layout, and the standard location
//! override for running against the real dataset.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nbids::data::NUM_FEATURES;
use nbids::rng::SplitMix64;

/// When set, desk-scale tests run against this real dataset root instead
/// of a generated one.
pub const DATA_ROOT_ENV: &str = "NBAIOT_DATA_ROOT";

pub const CLASS_FILES: [(&str, &str); 8] = [
    ("benign", "benign_traffic.csv"),
    ("mirai_udp", "mirai_attacks/udp.csv"),
    ("gafgyt_combo", "gafgyt_attacks/combo.csv"),
    ("gafgyt_junk", "gafgyt_attacks/junk.csv"),
    ("gafgyt_scan", "gafgyt_attacks/scan.csv"),
    ("mirai_ack", "mirai_attacks/ack.csv"),
    ("mirai_syn", "mirai_attacks/syn.csv"),
    ("mirai_udp_plain", "mirai_attacks/udpplain.csv"),
];

/// Generate a dataset in the N-BaIoT directory layout under `root`.
///
/// Each class draws from its own per-feature scale template (class
/// templates are well separated, the per-sample noise is lognormal),
/// split across two device directories. The result is strongly
/// separable, like the traffic statistics it stands in for.
pub fn generate_synthetic_nbaiot(root: &Path, rows_per_class_per_device: usize, seed: u64) {
    let devices = ["device_a", "device_b"];
    for (class_idx, (_, rel_path)) in CLASS_FILES.iter().enumerate() {
        // class template: per-feature base scale in [0.5, 4.5]
        let mut template_rng = SplitMix64::with_stream(seed, 1000 + class_idx as u64);
        let template: Vec<f64> = (0..NUM_FEATURES)
            .map(|_| 0.5 + 4.0 * template_rng.next_f64())
            .collect();

        for (dev_idx, device) in devices.iter().enumerate() {
            let path = root.join(device).join(rel_path);
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            let mut rng = SplitMix64::with_stream(
                seed,
                (class_idx * devices.len() + dev_idx) as u64,
            );
            let mut text = String::new();
            for j in 0..NUM_FEATURES {
                if j > 0 {
                    text.push(',');
                }
                write!(text, "stat_{j}").unwrap();
            }
            text.push('\n');
            for _ in 0..rows_per_class_per_device {
                for (j, base) in template.iter().enumerate() {
                    if j > 0 {
                        text.push(',');
                    }
                    let noise = (rng.normal() * 0.25).exp();
                    let jitter = rng.normal() * 0.05;
                    write!(text, "{:.6}", base * noise + jitter).unwrap();
                }
                text.push('\n');
            }
            std::fs::write(&path, text).unwrap();
        }
    }
}

/// Real dataset root if `NBAIOT_DATA_ROOT` points at one, otherwise
/// generate a synthetic stand-in under `fallback_dir` and return that.
pub fn dataset_root(fallback_dir: &Path, rows_per_class_per_device: usize, seed: u64) -> PathBuf {
    if let Ok(root) = std::env::var(DATA_ROOT_ENV) {
        let root = PathBuf::from(root);
        if root.is_dir() {
            return root;
        }
        panic!("{DATA_ROOT_ENV} is set but {} is not a directory", root.display());
    }
    generate_synthetic_nbaiot(fallback_dir, rows_per_class_per_device, seed);
    fallback_dir.to_path_buf()
}

pub fn nbids_bin() -> &'static str {
    env!("CARGO_BIN_EXE_nbids")
}

/// Run the CLI binary, panicking (with captured output) on nonzero exit.
pub fn run_nbids(args: &[&str]) -> String {
    let output = std::process::Command::new(nbids_bin())
        .args(args)
        .output()
        .expect("failed to spawn nbids");
    if !output.status.success() {
        panic!(
            "nbids {args:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
            output.status.code(),
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        );
    }
    String::from_utf8(output.stdout).expect("stdout not utf-8")
}
