//! Artifact emission: CSV curves, JSON reports, run manifests.
//!
//! Every numeric is written with Rust's shortest round-trip `Display`
//! formatting, so identical inputs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use chiller_core::lindblad::Liouvillian;
use chiller_core::stages::BreakdownRow;
use chiller_core::sweep::SweepRow;

pub struct OutDir {
    root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutDir {
    pub fn new(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> anyhow::Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, text)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `sweep` CSV: one row per cold frequency, absent COP and shares left empty,
/// per-row solver errors in the last column.
pub fn sweep_csv(rows: &[SweepRow<f64>]) -> String {
    let mut out = String::from(
        "omega_c,qdot_w,qdot_h,qdot_c,cop,entropy_rate,ds_plus,ds_minus,ds_leak,cooling,error\n",
    );
    for r in rows {
        match (&r.point, &r.error) {
            (Some(p), _) => {
                let (sp, sm, sl) = match p.shares {
                    Some((a, b, c)) => (Some(a), Some(b), Some(c)),
                    None => (None, None, None),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},",
                    r.omega_c,
                    p.currents.work,
                    p.currents.hot,
                    p.currents.cold,
                    fmt_opt(p.cop),
                    p.entropy,
                    fmt_opt(sp),
                    fmt_opt(sm),
                    fmt_opt(sl),
                    p.cooling,
                );
            }
            (None, err) => {
                let msg = err.clone().unwrap_or_default().replace(',', ";");
                let _ = writeln!(out, "{},,,,,,,,,,{}", r.omega_c, msg);
            }
        }
    }
    out
}

/// `breakdown` CSV with the full stage decomposition per cold frequency.
pub fn breakdown_csv(rows: &[BreakdownRow<f64>]) -> String {
    let mut out = String::from(
        "omega_c,i_plus,i_minus,i_leak,\
         qdot_w_plus,qdot_h_plus,qdot_c_plus,\
         qdot_w_minus,qdot_h_minus,qdot_c_minus,\
         qdot_w_leak,qdot_h_leak,qdot_c_leak,\
         qdot_w_total,qdot_h_total,qdot_c_total,\
         ds_plus,ds_minus,ds_leak,ds_total\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.omega_c,
            r.rates.i_plus,
            r.rates.i_minus,
            r.rates.i_leak,
            r.plus.work,
            r.plus.hot,
            r.plus.cold,
            r.minus.work,
            r.minus.hot,
            r.minus.cold,
            r.leak.work,
            r.leak.hot,
            r.leak.cold,
            r.total.work,
            r.total.hot,
            r.total.cold,
            r.entropy.0,
            r.entropy.1,
            r.entropy.2,
            r.entropy_total,
        );
    }
    out
}

/// Channel-table debug dump `(bath, omega, rate_down, rate_up)`.
pub fn channels_csv(liouv: &Liouvillian<f64>) -> String {
    let mut out = String::from("bath,omega,rate_down,rate_up\n");
    for (bath, omega, down, up) in liouv.channel_table() {
        let _ = writeln!(out, "{bath},{omega},{down},{up}");
    }
    out
}

#[derive(Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Ties every output to its exact inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub wall_time_ms: u128,
    pub artifacts: Vec<String>,
    pub checks: Vec<CheckLine>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}
