//! Command-line front end.
//!
//! Exit codes: 0 success, 1 malformed input, 2 validation failure,
//! 3 numeric-tolerance failure. Human reports print floats to 12 significant
//! digits; `--json` output and `--save` files use shortest round-trip floats.

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Value, json};

use crate::distance::{
    DistanceError, DistanceMatrix, consistent_matrices_sharing_k, distance_matrix_of, enumerate_signed,
    triangle_check,
};
use crate::format::{FormatError, fmt_element, fmt_matrix, fmt12, group_to_value, read_matrix, read_text};
use crate::group::{GroupDescriptor, GroupKind};
use crate::holonomy::{
    DEFAULT_STEPS, EdgePath, HolonomyError, Quadrature, build_gauge, connection_from_pc, flat_connection_from_consistent,
    holonomy_trace, pc_from_connection,
};
use crate::inconsistency::{InconsistencyError, nearest_consistent, reduce};
use crate::matrix::{MatrixError, PcMatrix, WeightVector, is_consistent, recover_weights};
use crate::service;
use crate::session::{IiMode, SessionError, report_for_mode};

/// Residual allowed for the holonomy round trip.
pub const ROUNDTRIP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "pcgeom", version, about = "Pairwise-comparison matrices over groups")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Expected coefficient group, e.g. positive_reals or positive_reals_power:3.
    #[arg(long, global = true)]
    pub group: Option<GroupKind>,
    /// Equality tolerance for consistency checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Print machine-readable JSON instead of a report.
    #[arg(long, global = true)]
    pub json: bool,
    /// Also write the result to this file.
    #[arg(long, global = true)]
    pub save: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the matrix conditions and report consistency.
    Validate { path: PathBuf },
    /// Inconsistency index.
    Ii {
        path: PathBuf,
        /// local, chain or indicator.
        #[arg(long, default_value = "local")]
        mode: IiMode,
    },
    /// Weights of a consistent matrix.
    Weights {
        path: PathBuf,
        /// Least-squares weights when the matrix is not consistent.
        #[arg(long)]
        fit: bool,
    },
    /// Iterated worst-triad reduction.
    Reduce {
        path: PathBuf,
        #[arg(long, default_value_t = 1)]
        steps: usize,
    },
    /// Distance matrix `|ln a_ij|` and its triangle check.
    Distmat { path: PathBuf },
    /// Matrices sharing a distance matrix (CSV or JSON input).
    Enumerate {
        path: PathBuf,
        /// Only the consistent ones, via the superdiagonal chain.
        #[arg(long)]
        consistent_only: bool,
    },
    /// Connection round trip or flat potential.
    Holonomy {
        path: PathBuf,
        #[arg(long, conflicts_with = "flat")]
        roundtrip: bool,
        #[arg(long)]
        flat: bool,
        /// Midpoint sub-intervals per edge; exact edge integrals when omitted.
        #[arg(long)]
        steps: Option<usize>,
        /// Write per-sub-interval partial products of every extraction path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Serve the session API over HTTP.
    Serve {
        /// Starting matrix; a 3x3 identity over positive_reals when omitted.
        path: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Malformed = 1,
    Invalid = 2,
    Tolerance = 3,
}

#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub status: ExitStatus,
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    fn new(status: ExitStatus, message: impl Into<String>) -> Self {
        CliError {
            status,
            message: message.into(),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let status = if e.is_syntax() { ExitStatus::Malformed } else { ExitStatus::Invalid };
        CliError::new(status, e.to_string())
    }
}

impl From<DistanceError> for CliError {
    fn from(e: DistanceError) -> Self {
        let status = match e {
            DistanceError::Parse { .. } => ExitStatus::Malformed,
            _ => ExitStatus::Invalid,
        };
        CliError::new(status, e.to_string())
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new(ExitStatus::Invalid, e.to_string())
            }
        }
    )*};
}

invalid_from!(MatrixError, InconsistencyError, SessionError);

impl From<HolonomyError> for CliError {
    fn from(e: HolonomyError) -> Self {
        let status = match e {
            HolonomyError::NotConsistent(_) => ExitStatus::Tolerance,
            _ => ExitStatus::Invalid,
        };
        CliError::new(status, e.to_string())
    }
}

struct Ctx<'a> {
    global: &'a GlobalArgs,
}

impl Ctx<'_> {
    fn expected_group(&self) -> Option<GroupDescriptor> {
        self.global
            .group
            .map(|k| GroupDescriptor::new(k).with_tolerance(self.global.tol))
    }

    fn load(&self, path: &Path) -> Result<PcMatrix, CliError> {
        Ok(read_matrix(path, self.expected_group())?)
    }

    fn save(&self, contents: impl FnOnce(&Path) -> String) -> Result<(), CliError> {
        if let Some(path) = &self.global.save {
            let text = contents(path);
            std::fs::write(path, text)
                .map_err(|e| CliError::new(ExitStatus::Malformed, format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    fn save_json<T: Serialize>(&self, value: &T) -> Result<(), CliError> {
        self.save(|_| pretty(value))
    }

    /// `human` unless `--json`, in which case the JSON value.
    fn emit(&self, human: String, machine: &Value, status: ExitStatus) -> Outcome {
        let stdout = if self.global.json { pretty(machine) } else { human };
        Outcome { stdout, status }
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn weights_json(w: &WeightVector) -> Value {
    json!({
        "group": group_to_value(&w.group),
        "origin": w.origin,
        "weights": w.weights.iter().map(|g| g.to_payload()).collect::<Vec<_>>(),
    })
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_distance(path: &Path) -> Result<DistanceMatrix, CliError> {
    let text = read_text(path)?;
    if is_csv(path) {
        Ok(DistanceMatrix::from_csv(&text)?)
    } else {
        serde_json::from_str(&text).map_err(|e| {
            let status = if e.is_data() { ExitStatus::Invalid } else { ExitStatus::Malformed };
            CliError::new(status, format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let ctx = Ctx { global: &cli.global };
    match &cli.command {
        Command::Validate { path } => validate(&ctx, path),
        Command::Ii { path, mode } => ii(&ctx, path, *mode),
        Command::Weights { path, fit } => weights(&ctx, path, *fit),
        Command::Reduce { path, steps } => reduce_cmd(&ctx, path, *steps),
        Command::Distmat { path } => distmat(&ctx, path),
        Command::Enumerate { path, consistent_only } => enumerate(&ctx, path, *consistent_only),
        Command::Holonomy {
            path,
            flat,
            steps,
            trace,
            ..
        } => holonomy(&ctx, path, *flat, *steps, trace.as_deref()),
        Command::Serve { path, port, host } => serve(&ctx, path.as_deref(), SocketAddr::new(*host, *port)),
    }
}

fn validate(ctx: &Ctx, path: &Path) -> Result<Outcome, CliError> {
    let m = match ctx.load(path) {
        Ok(m) => m,
        Err(CliError {
            status: ExitStatus::Invalid,
            message,
        }) => {
            let machine = json!({ "valid": false, "error": message });
            return Ok(ctx.emit(format!("invalid: {message}\n"), &machine, ExitStatus::Invalid));
        }
        Err(e) => return Err(e),
    };
    let residual = m.consistency_residual();
    let consistent = is_consistent(&m, ctx.global.tol);
    let machine = json!({
        "valid": true,
        "n": m.size(),
        "group": group_to_value(m.group()),
        "consistent": consistent,
        "residual": residual,
    });
    ctx.save_json(&machine)?;
    let human = format!(
        "valid: {n}x{n} matrix over {g}\nconsistent: {c} (residual {r})\n",
        n = m.size(),
        g = m.group(),
        c = if consistent { "yes" } else { "no" },
        r = fmt12(residual),
    );
    Ok(ctx.emit(human, &machine, ExitStatus::Ok))
}

fn ii(ctx: &Ctx, path: &Path, mode: IiMode) -> Result<Outcome, CliError> {
    let m = ctx.load(path)?;
    let (value, report) = report_for_mode(&m, mode)?;
    let mut machine = json!({ "mode": mode, "ii": value });
    let mode_name = serde_json::to_value(mode).expect("mode serializes");
    let mut human = format!("ii ({}): {}\n", mode_name.as_str().unwrap_or_default(), fmt12(value));
    if let Some(r) = report {
        machine["worst"] = json!(r.worst_triad);
        machine["triads"] = json!(r.per_triad);
        if let Some([i, j, k]) = r.worst_triad {
            let _ = writeln!(human, "worst triad: ({i}, {j}, {k})");
        }
        for t in &r.per_triad {
            let [i, j, k] = t.ijk;
            let _ = writeln!(human, "  ({i}, {j}, {k})  {}", fmt12(t.value));
        }
    }
    ctx.save_json(&machine)?;
    Ok(ctx.emit(human, &machine, ExitStatus::Ok))
}

fn weights(ctx: &Ctx, path: &Path, fit: bool) -> Result<Outcome, CliError> {
    let m = ctx.load(path)?;
    let residual = m.consistency_residual();
    let (w, source) = if is_consistent(&m, ctx.global.tol) {
        (recover_weights(&m), "recovered")
    } else if fit {
        (nearest_consistent(&m)?.0, "least-squares fit")
    } else {
        return Err(CliError::new(
            ExitStatus::Tolerance,
            format!(
                "matrix is not consistent within {} (residual {}); pass --fit for least-squares weights",
                fmt12(ctx.global.tol),
                fmt12(residual)
            ),
        ));
    };
    let mut machine = weights_json(&w);
    machine["source"] = Value::from(source);
    ctx.save_json(&machine)?;
    let mut human = format!("weights ({source}):\n");
    for (i, g) in w.weights.iter().enumerate() {
        let _ = writeln!(human, "  {:>3}  {}", w.origin + i as i64, fmt_element(g));
    }
    Ok(ctx.emit(human, &machine, ExitStatus::Ok))
}

fn reduce_cmd(ctx: &Ctx, path: &Path, steps: usize) -> Result<Outcome, CliError> {
    let m = ctx.load(path)?;
    let (out, trace) = reduce(&m, steps)?;
    ctx.save_json(&out)?;
    let trace_json: Vec<Value> = trace
        .iter()
        .map(|s| json!({ "kind": s.kind, "triad": s.triad, "ii_before": s.ii_before, "ii_after": s.ii_after }))
        .collect();
    let machine = json!({ "matrix": out, "trace": trace_json });
    let mut human = String::new();
    for (n, s) in trace.iter().enumerate() {
        let kind = serde_json::to_value(s.kind).expect("kind serializes");
        let triad = s
            .triad
            .map(|[i, j, k]| format!(" ({i}, {j}, {k})"))
            .unwrap_or_default();
        let _ = writeln!(
            human,
            "step {}: {}{} ii {} -> {}",
            n + 1,
            kind.as_str().unwrap_or_default(),
            triad,
            fmt12(s.ii_before),
            fmt12(s.ii_after)
        );
    }
    let _ = writeln!(human, "{}", fmt_matrix(&out));
    Ok(ctx.emit(human, &machine, ExitStatus::Ok))
}

fn distmat(ctx: &Ctx, path: &Path) -> Result<Outcome, CliError> {
    let m = ctx.load(path)?;
    let k = distance_matrix_of(&m)?;
    let triangle = triangle_check(&k);
    ctx.save(|p| if is_csv(p) { k.to_csv() } else { pretty(&k) })?;
    let machine = json!({ "n": k.size(), "k": k.rows(), "triangle": triangle });
    let cells: Vec<Vec<String>> = k.rows().iter().map(|r| r.iter().map(|v| fmt12(*v)).collect()).collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
    let mut human = String::new();
    for r in &cells {
        let line: Vec<String> = r.iter().map(|c| format!("{c:>width$}")).collect();
        let _ = writeln!(human, "{}", line.join("  "));
    }
    let _ = writeln!(
        human,
        "triangle inequality: {}",
        if triangle.holds { "holds".to_string() } else { format!("violated at {:?}", triangle.violations) }
    );
    Ok(ctx.emit(human, &machine, ExitStatus::Ok))
}

fn enumerate(ctx: &Ctx, path: &Path, consistent_only: bool) -> Result<Outcome, CliError> {
    let k = read_distance(path)?;
    let tol = ctx.global.tol;
    let records: Vec<Value> = if consistent_only {
        consistent_matrices_sharing_k(&k)?
            .survivors
            .into_iter()
            .map(|m| json!({ "matrix": m, "consistent": true }))
            .collect()
    } else {
        enumerate_signed(&k)?
            .into_iter()
            .map(|e| json!({ "signs": e.signs, "matrix": e.matrix, "consistent": is_consistent(&e.matrix, tol) }))
            .collect()
    };
    ctx.save_json(&records)?;
    let consistent = records.iter().filter(|r| r["consistent"] == Value::Bool(true)).count();
    let mut human = format!("{} matrices ({consistent} consistent)\n", records.len());
    for (n, r) in records.iter().enumerate() {
        let m: PcMatrix = serde_json::from_value(r["matrix"].clone()).expect("matrix round-trips");
        let flag = if r["consistent"] == Value::Bool(true) { "consistent" } else { "inconsistent" };
        let _ = writeln!(human, "\n#{} {flag}\n{}", n + 1, fmt_matrix(&m));
    }
    Ok(ctx.emit(human, &Value::Array(records), ExitStatus::Ok))
}

fn holonomy(
    ctx: &Ctx,
    path: &Path,
    flat: bool,
    steps: Option<usize>,
    trace: Option<&Path>,
) -> Result<Outcome, CliError> {
    let m = ctx.load(path)?;
    let q = steps.map_or(Quadrature::Exact, Quadrature::Midpoint);
    let quadrature = match q {
        Quadrature::Exact => "exact".to_string(),
        Quadrature::Midpoint(n) => format!("midpoint, {n} steps per edge"),
    };
    let gauge = build_gauge(&m);
    if let Some(trace_path) = trace {
        let c = connection_from_pc(&m)?;
        let mut paths = Vec::new();
        for i in 0..m.size() {
            for j in i + 1..m.size() {
                let p = EdgePath::chain(gauge.base, i)
                    .concat(&EdgePath::edge(i, j))?
                    .concat(&EdgePath::chain(gauge.base, j).reverse())?;
                let entries = holonomy_trace(&c, &p, steps.unwrap_or(DEFAULT_STEPS))?;
                paths.push(json!({ "pair": [i, j], "path": p.vertices(), "trace": entries }));
            }
        }
        std::fs::write(trace_path, pretty(&paths))
            .map_err(|e| CliError::new(ExitStatus::Malformed, format!("{}: {e}", trace_path.display())))?;
    }
    if flat {
        let fc = flat_connection_from_consistent(&m, ctx.global.tol)?;
        let back = pc_from_connection(&fc, &fc.gauge(), q)?;
        let residual = back.max_entry_distance(&m)?;
        let w = fc.weights();
        let machine = json!({
            "potential": fc.potential(),
            "weights": weights_json(&w)["weights"],
            "residual": residual,
            "quadrature": quadrature,
        });
        ctx.save_json(&machine)?;
        let mut human = format!("flat potential f(s_i), base s_{}:\n", fc.base());
        for (i, f) in fc.potential().iter().enumerate() {
            let comps: Vec<String> = f.iter().map(|x| fmt12(*x)).collect();
            let _ = writeln!(human, "  {:>3}  [{}]  weight {}", i, comps.join(", "), fmt_element(&w.weights[i]));
        }
        let _ = writeln!(human, "reconstruction residual: {} ({quadrature})", fmt12(residual));
        let status = if residual <= ROUNDTRIP_TOLERANCE { ExitStatus::Ok } else { ExitStatus::Tolerance };
        return Ok(ctx.emit(human, &machine, status));
    }
    let c = connection_from_pc(&m)?;
    let back = pc_from_connection(&c, &gauge, q)?;
    let residual = back.max_entry_distance(&m)?;
    let pass = residual <= ROUNDTRIP_TOLERANCE;
    let machine = json!({
        "residual": residual,
        "tolerance": ROUNDTRIP_TOLERANCE,
        "pass": pass,
        "quadrature": quadrature,
        "connection": c.to_records(),
    });
    ctx.save_json(&machine)?;
    let human = format!(
        "round-trip residual: {} ({quadrature})\n{}\n",
        fmt12(residual),
        if pass { "pass" } else { "FAIL: residual above 1e-8" }
    );
    Ok(ctx.emit(human, &machine, if pass { ExitStatus::Ok } else { ExitStatus::Tolerance }))
}

fn serve(ctx: &Ctx, path: Option<&Path>, addr: SocketAddr) -> Result<Outcome, CliError> {
    let m = match path {
        Some(p) => ctx.load(p)?,
        None => PcMatrix::identity(
            ctx.expected_group().unwrap_or_else(GroupDescriptor::positive_reals),
            3,
        ),
    };
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| CliError::new(ExitStatus::Malformed, format!("cannot start runtime: {e}")))?;
    eprintln!("listening on http://{addr} (API under /v1)");
    runtime
        .block_on(service::serve(addr, service::shared(m)))
        .map_err(|e| CliError::new(ExitStatus::Malformed, format!("{addr}: {e}")))?;
    Ok(Outcome {
        stdout: String::new(),
        status: ExitStatus::Ok,
    })
}
