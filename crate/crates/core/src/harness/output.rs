//! CSV, JSON and SVG writers. File names embed the config fingerprint.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::FlowTrace;
use crate::error::{Error, Result};
use crate::optimizers::Trajectory;
use crate::verify::VerifyReport;

use super::ablate::AblationReport;
use super::config::Format;
use super::sweep::Heatmap;
use super::train::TrainReport;
use super::svg;

/// Shortest round-trip formatting; infinities print as `inf`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Keeps `[A-Za-z0-9._-]`, maps anything else to `_`.
pub fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::InvalidConfig(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv encoding failed: {e}")))
}

/// One row per step: `step,loss,hamiltonian,mask_ratio,effective_lr,w0,...`.
pub fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>> {
    let dim = traj.steps.first().map_or(0, |s| s.w.len());
    let mut header: Vec<String> = ["step", "loss", "hamiltonian", "mask_ratio", "effective_lr"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..dim).map(|i| format!("w{i}")));
    let rows = traj.steps.iter().enumerate().map(|(k, s)| {
        let mut row = vec![
            k.to_string(),
            fmt_f64(s.loss),
            fmt_f64(s.hamiltonian),
            fmt_f64(s.mask_ratio),
            fmt_f64(s.effective_lr),
        ];
        row.extend(s.w.iter().map(|x| fmt_f64(*x)));
        row
    });
    csv_bytes(&header, rows)
}

/// Learning rates down the first column, one column per momentum value.
pub fn heatmap_csv(hm: &Heatmap) -> Result<Vec<u8>> {
    let mut header = vec!["lr".to_string()];
    header.extend(hm.betas.iter().map(|b| format!("beta={}", fmt_f64(*b))));
    let rows = hm.lrs.iter().zip(&hm.rates).map(|(lr, row)| {
        let mut r = vec![fmt_f64(*lr)];
        r.extend(row.iter().map(|x| fmt_f64(*x)));
        r
    });
    csv_bytes(&header, rows)
}

/// Columns `t, w.., s.., v.., loss, hamiltonian`, every `sample_every`-th row.
pub fn flow_csv(trace: &FlowTrace, sample_every: usize) -> Result<Vec<u8>> {
    let first = trace.states.first();
    let (dw, ds, dv) = first.map_or((0, 0, 0), |s| (s.w.len(), s.s.len(), s.v.len()));
    let mut header = vec!["t".to_string()];
    header.extend((0..dw).map(|i| format!("w{i}")));
    header.extend((0..ds).map(|i| format!("s{i}")));
    header.extend((0..dv).map(|i| format!("v{i}")));
    header.push("loss".into());
    header.push("hamiltonian".into());
    let last = trace.states.len().saturating_sub(1);
    let rows = (0..trace.states.len())
        .filter(|k| k % sample_every.max(1) == 0 || *k == last)
        .map(|k| {
            let st = &trace.states[k];
            let mut r = vec![fmt_f64(trace.times[k])];
            r.extend(st.w.iter().chain(&st.s).chain(&st.v).map(|x| fmt_f64(*x)));
            r.push(fmt_f64(trace.loss_samples[k]));
            r.push(fmt_f64(trace.hamiltonian_samples[k]));
            r
        });
    csv_bytes(&header, rows)
}

pub fn ablation_csv(rep: &AblationReport) -> Result<Vec<u8>> {
    let header: Vec<String> = ["variant", "best_rate", "best_lr", "best_beta", "diverged_cells"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                fmt_f64(r.best.rate),
                fmt_f64(r.best.lr),
                fmt_f64(r.best.beta),
                r.heatmap.diverged_cells().to_string(),
            ]
        })
        .collect();
    if let Some(opt) = rep.analytic_baseline {
        rows.push(vec![
            "gdm_analytic_optimum".into(),
            fmt_f64(opt.rate),
            fmt_f64(opt.lr),
            fmt_f64(opt.beta),
            "0".into(),
        ]);
    }
    csv_bytes(&header, rows)
}

pub fn train_csv(rep: &TrainReport) -> Result<Vec<u8>> {
    let header: Vec<String> = [
        "seed",
        "initial_loss",
        "target",
        "final_loss_base",
        "final_loss_cautious",
        "steps_to_target_base",
        "steps_to_target_cautious",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let opt = |s: Option<usize>| s.map_or_else(|| "never".to_string(), |v| v.to_string());
    let rows = rep.seeds.iter().map(|r| {
        vec![
            r.seed.to_string(),
            fmt_f64(r.initial_loss),
            fmt_f64(r.target),
            fmt_f64(r.final_loss_base),
            fmt_f64(r.final_loss_cautious),
            opt(r.steps_to_target_base),
            opt(r.steps_to_target_cautious),
        ]
    });
    csv_bytes(&header, rows)
}

pub fn verify_csv(rep: &VerifyReport) -> Result<Vec<u8>> {
    let header: Vec<String> = ["suite", "evidence", "gating", "passed", "total", "min_margin"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = rep.suites.iter().map(|s| {
        vec![
            s.name.clone(),
            format!("{:?}", s.evidence),
            s.gating().to_string(),
            s.passed.to_string(),
            s.total.to_string(),
            fmt_f64(s.min_margin),
        ]
    });
    csv_bytes(&header, rows)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Collects files for one command and writes them under a directory.
pub struct Emitter {
    dir: PathBuf,
    formats: Vec<Format>,
    prefix: String,
    written: Vec<PathBuf>,
}

impl Emitter {
    /// Files are named `<command>-<fingerprint>[-<part>].<ext>`.
    pub fn new(dir: &Path, formats: &[Format], command: &str, fingerprint: &str) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            formats: formats.to_vec(),
            prefix: format!("{command}-{fingerprint}"),
            written: Vec::new(),
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn name(&self, part: Option<&str>, ext: &str) -> PathBuf {
        match part {
            Some(p) => self.dir.join(format!("{}-{}.{ext}", self.prefix, sanitize(p))),
            None => self.dir.join(format!("{}.{ext}", self.prefix)),
        }
    }

    pub fn write(&mut self, part: Option<&str>, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.name(part, ext);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn csv(&mut self, part: Option<&str>, bytes: Result<Vec<u8>>) -> Result<()> {
        if self.wants(Format::Csv) {
            self.write(part, "csv", &bytes?)?;
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, part: Option<&str>, value: &T) -> Result<()> {
        if self.wants(Format::Json) {
            self.write(part, "json", &to_json(value)?)?;
        }
        Ok(())
    }

    pub fn svg(&mut self, part: Option<&str>, render: impl FnOnce() -> String) -> Result<()> {
        if self.wants(Format::Svg) {
            self.write(part, "svg", render().as_bytes())?;
        }
        Ok(())
    }

    pub fn finish(self) -> Vec<PathBuf> {
        self.written
    }
}

/// Loss curves of several trajectories on a log axis.
pub fn loss_plot(title: &str, trajs: &[&Trajectory]) -> String {
    let series: Vec<(String, Vec<f64>)> = trajs
        .iter()
        .map(|t| (format!("{} seed {}", t.label, t.seed), t.losses()))
        .collect();
    svg::line_plot(title, &series, true)
}
