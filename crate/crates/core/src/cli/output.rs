//! Artifact writers. Floats are written in shortest round-trip form so that
//! reruns with the same seeds produce byte-identical files.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::Failure;
use crate::linalg::to_rows;
use crate::lqr::RiccatiSolution;
use crate::model::{ChannelSymbol, Problem};
use crate::simulate::{Estimate, SimulationContext, SimulationTrace, TraceMetrics};
use crate::voi::{voi_quadratic, VoiTable};

#[derive(Debug, Serialize)]
pub struct SeedLedger {
    pub base: u64,
    pub count: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Serialize)]
pub struct TraceSummary {
    pub seed: u64,
    pub file: String,
    pub metrics: TraceMetrics,
}

#[derive(Debug, Serialize)]
pub struct RiccatiDocument {
    pub cost_to_go: Vec<Vec<Vec<f64>>>,
    pub gain: Vec<Vec<Vec<f64>>>,
    pub input_curvature: Vec<Vec<Vec<f64>>>,
    pub estimation_penalty: Vec<Vec<Vec<f64>>>,
    pub transmission_price: Vec<f64>,
}

impl RiccatiDocument {
    pub fn new(ric: &RiccatiSolution) -> Self {
        let rows = |m: &[DMatrix<f64>]| m.iter().map(to_rows).collect();
        Self {
            cost_to_go: rows(&ric.cost_to_go),
            gain: rows(&ric.gain),
            input_curvature: rows(&ric.input_curvature),
            estimation_penalty: rows(&ric.estimation_penalty),
            transmission_price: ric.transmission_price.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub rate: Estimate,
    pub regulation: Estimate,
    pub loss: Estimate,
    pub transmissions: f64,
}

fn csv_error(e: csv::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn open(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut writer = open(path)?;
    serde_json::to_writer_pretty(&mut writer, value).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::io::Write::write_all(&mut writer, b"\n")?;
    Ok(())
}

fn names(prefix: &str, len: usize) -> impl Iterator<Item = String> + '_ {
    (1..=len).map(move |i| format!("{prefix}_{i}"))
}

fn matrix_names(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    (1..=rows)
        .flat_map(|i| (1..=cols).map(move |j| format!("{prefix}_{i}_{j}")))
        .collect()
}

fn vector(v: &DVector<f64>) -> impl Iterator<Item = String> + '_ {
    v.iter().map(f64::to_string)
}

fn matrix(m: &DMatrix<f64>) -> Vec<String> {
    to_rows(m).into_iter().flatten().map(|x| x.to_string()).collect()
}

fn blanks(len: usize) -> impl Iterator<Item = String> {
    std::iter::repeat_n(String::new(), len)
}

/// Columns `k, theta, S_i_j, L_i_j, Gamma_i_j` for `k = 0..=N+1`; the gain
/// and price are blank in the terminal row.
pub fn write_riccati_csv(path: &Path, ric: &RiccatiSolution) -> Result<(), Failure> {
    let n = ric.cost_to_go[0].nrows();
    let m = ric.gain[0].nrows();
    let mut w = csv::Writer::from_writer(open(path)?);
    let mut header = vec!["k".to_string(), "theta".to_string()];
    header.extend(matrix_names("S", n, n));
    header.extend(matrix_names("L", m, n));
    header.extend(matrix_names("Gamma", n, n));
    w.write_record(&header).map_err(csv_error)?;
    let horizon = ric.horizon();
    for k in 0..=horizon + 1 {
        let mut row = vec![k.to_string()];
        if k <= horizon {
            row.push(ric.transmission_price[k].to_string());
        } else {
            row.push(String::new());
        }
        row.extend(matrix(&ric.cost_to_go[k]));
        if k <= horizon {
            row.extend(matrix(&ric.gain[k]));
        } else {
            row.extend(blanks(m * n));
        }
        row.extend(matrix(&ric.estimation_penalty[k]));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `stage, e_1.., value, voi, voi_quadratic, rho`, one row per stage and node.
pub fn write_table_csv(path: &Path, table: &VoiTable, problem: &Problem, ric: &RiccatiSolution) -> Result<(), Failure> {
    let n = table.grid.dim();
    let mut w = csv::Writer::from_writer(open(path)?);
    let mut header = vec!["stage".to_string()];
    header.extend(names("e", n));
    header.extend(["value", "voi", "voi_quadratic", "rho"].map(String::from));
    w.write_record(&header).map_err(csv_error)?;
    for k in 0..=table.horizon() {
        for flat in 0..table.grid.len() {
            let e = table.grid.node(flat);
            let mut row = vec![k.to_string()];
            row.extend(vector(&e));
            row.push(table.value[k][flat].to_string());
            row.push(table.voi[k][flat].to_string());
            row.push(voi_quadratic(&e, k, ric, problem).to_string());
            row.push(table.rho[k][flat].to_string());
            w.write_record(&row).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per stage `k = 0..=N+1`. Decision columns are blank in the
/// terminal row, which only carries `x(N+1)` and `z(N+1)`.
pub fn write_trace_csv(path: &Path, trace: &SimulationTrace, ctx: &SimulationContext) -> Result<(), Failure> {
    let n = ctx.problem.state_dim();
    let m = ctx.problem.input_dim();
    let p = ctx.problem.output_dim();
    let mut w = csv::Writer::from_writer(open(path)?);
    let mut header = vec!["k".to_string()];
    header.extend(names("x", n));
    header.push("z_received".into());
    header.extend(names("z", n));
    header.extend(names("y", p));
    header.extend(names("u", m));
    header.push("sigma".into());
    header.extend(names("xcheck", n));
    header.extend(names("xhat", n));
    header.extend(names("mismatch", n));
    header.push("voi".into());
    header.extend(names("E", n));
    w.write_record(&header).map_err(csv_error)?;

    let symbol = |z: &ChannelSymbol| -> Vec<String> {
        match z {
            ChannelSymbol::Payload(v) => std::iter::once("1".to_string()).chain(vector(v)).collect(),
            ChannelSymbol::Erasure => std::iter::once("0".to_string()).chain(blanks(n)).collect(),
        }
    };
    for (k, s) in trace.stages.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(vector(&s.state));
        row.extend(symbol(&s.received));
        row.extend(vector(&s.measurement));
        row.extend(vector(&s.control));
        row.push(u8::from(s.transmit).to_string());
        row.extend(vector(&s.encoder_estimate));
        row.extend(vector(&s.decoder_estimate));
        row.extend(vector(&s.mismatch));
        row.push(s.voi.map(|v| v.to_string()).unwrap_or_default());
        row.extend(s.decoder_cov.diagonal().iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_error)?;
    }
    let mut row = vec![trace.stages.len().to_string()];
    row.extend(vector(&trace.terminal_state));
    row.extend(symbol(&trace.terminal_received));
    row.extend(blanks(p + m + 1 + 3 * n + 1 + n));
    w.write_record(&row).map_err(csv_error)?;
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(open(path)?);
    w.write_record([
        "lambda",
        "rate",
        "rate_se",
        "regulation",
        "regulation_se",
        "loss",
        "loss_se",
        "transmissions",
    ])
    .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.lambda.to_string(),
            r.rate.mean.to_string(),
            r.rate.se.to_string(),
            r.regulation.mean.to_string(),
            r.regulation.se.to_string(),
            r.loss.mean.to_string(),
            r.loss.se.to_string(),
            r.transmissions.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
