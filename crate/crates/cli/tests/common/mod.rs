#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn write_png(path: &Path, w: u32, h: u32, mut pixel: impl FnMut(u32, u32) -> [u8; 3]) {
    let img = image::RgbImage::from_fn(w, h, |x, y| image::Rgb(pixel(x, y)));
    img.save(path).unwrap();
}

/// Ten flat grey frames f0..f9 with evenly increasing brightness.
pub fn colinear(dir: &Path) -> PathBuf {
    let d = dir.join("colinear");
    std::fs::create_dir_all(&d).unwrap();
    for i in 0..10u32 {
        let v = (20 + 20 * i) as u8;
        write_png(&d.join(format!("f{i}.png")), 4, 3, |_, _| [v, v, v]);
    }
    d
}

/// `n` noisy mid-grey frames c00.. plus one white frame "zz" far away.
pub fn planted(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let d = dir.join("planted");
    std::fs::create_dir_all(&d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        write_png(&d.join(format!("c{i:02}.png")), 8, 8, |_, _| {
            let mut px = [0u8; 3];
            px.iter_mut().for_each(|p| *p = 120 + rng.random_range(0..12));
            px
        });
    }
    write_png(&d.join("zz.png"), 8, 8, |_, _| [255, 255, 255]);
    d
}

/// Frames a, b, c where a and b are close and c is far from both.
pub fn triple(dir: &Path) -> PathBuf {
    let d = dir.join("triple");
    std::fs::create_dir_all(&d).unwrap();
    for (name, v) in [("a", 10u8), ("b", 30), ("c", 200)] {
        write_png(&d.join(format!("{name}.png")), 2, 2, |_, _| [v, v, v]);
    }
    d
}

pub fn reseq(args: &[&str]) -> Output {
    reseq_env(args, &[])
}

pub fn reseq_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reseq"));
    cmd.args(args).env_remove("RESEQ_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
