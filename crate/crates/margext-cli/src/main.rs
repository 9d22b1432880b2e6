//! Command-line front door for the marginal-extremality library: JSON matrix
//! I/O, fixture emission, extremality checks with optional exact
//! certification, duality conversions, and Kraus extraction.
//!
//! Exit codes: 0 = extremal, 1 = not extremal, 2 = inconclusive,
//! 64 = usage/parse error, 65 = data violation (bad matrix, marginal or
//! dimension mismatch, invalid Choi), 70 = internal numerical failure.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use margext::duality::{
    check_membership_conditions, kraus_from_state, map_from_state, state_from_map, CPMapRep,
};
use margext::extremality::{check_rank_bounds, is_extremal_state, Verdict, WitnessDecomposition};
use margext::fixtures::FixtureId;
use margext::numerics::{ComplexMatrix, ComplexScalar};
use margext::oracle::{certify_verdict, Certification};
use margext::states::{BipartiteState, DensityMatrix, MarginalPair};
use margext::{MargextError, DEFAULT_TOL};

/// Exit codes for the different verdicts and failure classes.
const EXIT_EXTREMAL: i32 = 0;
const EXIT_NOT_EXTREMAL: i32 = 1;
const EXIT_INCONCLUSIVE: i32 = 2;
const EXIT_USAGE: i32 = 64;
const EXIT_DATA: i32 = 65;
const EXIT_INTERNAL: i32 = 70;

#[derive(Parser)]
#[command(
    name = "margext",
    version,
    about = "Extremality analysis for bipartite states with prescribed marginals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a bipartite state is an extreme point of C(rho1, rho2)
    Check(CheckArgs),
    /// Write a named fixture as JSON matrix file(s)
    Fixture(FixtureArgs),
    /// Convert a state to the Choi matrix of its map, or back
    Convert(ConvertArgs),
    /// Extract the canonical Kraus family of a state
    Kraus(KrausArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Bipartite state file (kind "bipartite" with local_dim)
    state: PathBuf,
    /// First marginal rho1 (plain d x d matrix file)
    rho1: PathBuf,
    /// Second marginal rho2 (plain d x d matrix file)
    rho2: PathBuf,
    /// Relative tolerance; overrides MARGEXT_TOL (default 1e-9)
    #[arg(long)]
    tol: Option<f64>,
    /// Also certify the verdict by exact rational arithmetic
    #[arg(long)]
    exact: bool,
    /// Emit the report as JSON on stdout
    #[arg(long, conflicts_with = "text")]
    json: bool,
    /// Emit a human-readable report on stdout (default)
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct FixtureArgs {
    /// Fixture name: qubit_bell:identity|x|y|z, d3_cyclic, d3_state_matrix,
    /// d4_cyclic
    name: String,
    /// Directory the file(s) are written into (created if absent)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group = ArgGroup::new("direction").required(true))]
struct ConvertArgs {
    /// Convert this bipartite state file to the Choi matrix of its map
    #[arg(long = "to-map", value_name = "STATE_FILE", group = "direction")]
    to_map: Option<PathBuf>,
    /// Convert this plain Choi matrix file back to a bipartite state
    #[arg(long = "to-state", value_name = "CHOI_FILE", group = "direction")]
    to_state: Option<PathBuf>,
    /// Explicit orthonormal eigenbasis of rho2 (plain d x d matrix file);
    /// fixes the identification when rho2 is degenerate
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Also write the eigenbasis that was used (plain matrix file), so the
    /// reverse conversion can reuse it
    #[arg(long = "emit-basis", value_name = "FILE")]
    emit_basis: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KrausArgs {
    /// Bipartite state file (kind "bipartite" with local_dim)
    state: PathBuf,
    /// Explicit orthonormal eigenbasis of rho2 (plain d x d matrix file)
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Directory for the operator files and the manifest
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    /// Relative tolerance; overrides MARGEXT_TOL (default 1e-9)
    #[arg(long)]
    tol: Option<f64>,
}

/// On-disk matrix document: row-major entries as [re, im] pairs. Bipartite
/// states additionally carry kind = "bipartite" and the local dimension.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    local_dim: Option<usize>,
}

/// On-disk extremality report.
#[derive(Serialize)]
struct ReportFile {
    verdict: String,
    local_dim: usize,
    ell: usize,
    joint_rank: usize,
    rank_margins: [f64; 2],
    bound_sqrt2d: bool,
    bound_parthasarathy: bool,
    state_rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<WitnessBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certification: Option<String>,
    tool_version: String,
    tolerance: f64,
    input_digest: String,
}

#[derive(Serialize)]
struct WitnessBlock {
    lambda: MatrixFile,
    state_plus: MatrixFile,
    state_minus: MatrixFile,
}

/// Manifest written next to extracted Kraus operator files.
#[derive(Serialize)]
struct KrausManifest {
    ell: usize,
    residual1: f64,
    residual2: f64,
    bound_sqrt2d: bool,
    bound_parthasarathy: bool,
}

/// An error carrying the exit code it maps to.
struct Failure {
    code: i32,
    err: anyhow::Error,
}

type CliResult<T> = Result<T, Failure>;

fn usage(err: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        err,
    }
}

fn data(err: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        err,
    }
}

/// Maps library errors to exit codes: internal numerical failures are
/// distinguished from violations in the supplied data.
fn lib_err(e: MargextError) -> Failure {
    let code = match &e {
        MargextError::WitnessConstructionFailure(_)
        | MargextError::KernelAnnihilationFailure { .. } => EXIT_INTERNAL,
        _ => EXIT_DATA,
    };
    Failure {
        code,
        err: anyhow::Error::new(e),
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Fixture(args) => cmd_fixture(args),
        Command::Convert(args) => cmd_convert(args),
        Command::Kraus(args) => cmd_kraus(args),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            f.code
        }
    }
}

/// Tolerance resolution: --tol beats MARGEXT_TOL beats the built-in default.
fn resolve_tol(flag: Option<f64>) -> CliResult<f64> {
    let validate = |t: f64, origin: &str| -> CliResult<f64> {
        if t.is_finite() && t > 0.0 {
            Ok(t)
        } else {
            Err(usage(anyhow!(
                "tolerance from {origin} must be a positive finite number, got {t}"
            )))
        }
    };
    if let Some(t) = flag {
        return validate(t, "--tol");
    }
    match std::env::var("MARGEXT_TOL") {
        Ok(raw) => {
            let t: f64 = raw
                .trim()
                .parse()
                .map_err(|_| usage(anyhow!("MARGEXT_TOL is not a number: {raw:?}")))?;
            validate(t, "MARGEXT_TOL")
        }
        Err(_) => Ok(DEFAULT_TOL),
    }
}

// ---------------------------------------------------------------------------
// Matrix file I/O
// ---------------------------------------------------------------------------

/// Reads and parses a matrix document, returning the raw bytes alongside so
/// callers can fold them into the input digest.
fn read_matrix_file(path: &Path) -> CliResult<(MatrixFile, Vec<u8>)> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)?;
    let parsed: MatrixFile = serde_json::from_slice(&bytes)
        .with_context(|| format!("cannot parse {}", path.display()))
        .map_err(usage)?;
    if let Some(kind) = &parsed.kind {
        if kind != "bipartite" {
            return Err(usage(anyhow!(
                "{}: unknown kind {kind:?} (only \"bipartite\" is recognized)",
                path.display()
            )));
        }
    }
    if parsed.entries.len() != parsed.rows * parsed.cols {
        return Err(usage(anyhow!(
            "{}: expected {} entries for a {}x{} matrix, got {}",
            path.display(),
            parsed.rows * parsed.cols,
            parsed.rows,
            parsed.cols,
            parsed.entries.len()
        )));
    }
    Ok((parsed, bytes))
}

fn to_matrix(mf: &MatrixFile, what: &str) -> CliResult<ComplexMatrix> {
    let entries = mf
        .entries
        .iter()
        .map(|&[re, im]| ComplexScalar::new(re, im))
        .collect();
    ComplexMatrix::new(mf.rows, mf.cols, entries).map_err(|e| usage(anyhow!("{what}: {e}")))
}

/// A plain matrix document: kind and local_dim must be absent.
fn plain_matrix(mf: &MatrixFile, what: &str) -> CliResult<ComplexMatrix> {
    if mf.kind.is_some() || mf.local_dim.is_some() {
        return Err(usage(anyhow!(
            "{what}: expected a plain matrix file without kind/local_dim"
        )));
    }
    to_matrix(mf, what)
}

/// A bipartite state document: kind = "bipartite" and a matching local_dim
/// are required; positivity and unit trace are validated by the library.
fn bipartite_state(mf: &MatrixFile, what: &str) -> CliResult<BipartiteState> {
    if mf.kind.as_deref() != Some("bipartite") {
        return Err(usage(anyhow!(
            "{what}: state files must declare kind = \"bipartite\""
        )));
    }
    let d = mf
        .local_dim
        .ok_or_else(|| usage(anyhow!("{what}: state files must declare local_dim")))?;
    if mf.rows != d * d || mf.cols != d * d {
        return Err(usage(anyhow!(
            "{what}: a local_dim {d} state must be {0}x{0}, got {1}x{2}",
            d * d,
            mf.rows,
            mf.cols
        )));
    }
    let mat = to_matrix(mf, what)?;
    BipartiteState::new(d, mat).map_err(lib_err)
}

fn matrix_file(m: &ComplexMatrix) -> MatrixFile {
    let mut entries = Vec::with_capacity(m.rows() * m.cols());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let z = m.get(r, c);
            entries.push([z.re, z.im]);
        }
    }
    MatrixFile {
        rows: m.rows(),
        cols: m.cols(),
        entries,
        kind: None,
        local_dim: None,
    }
}

fn state_file(s: &BipartiteState) -> MatrixFile {
    let mut mf = matrix_file(s.matrix());
    mf.kind = Some("bipartite".into());
    mf.local_dim = Some(s.local_dim());
    mf
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let body = serde_json::to_string_pretty(value).expect("report types serialize");
    std::fs::write(path, body + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(data)
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report types serialize")
    );
}

fn digest_hex(chunks: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for chunk in chunks {
        hasher.update(chunk);
    }
    format!("sha256:{:x}", hasher.finalize())
}

/// Builds the marginal pair of a state from its own partial traces, with the
/// default deterministic eigenbasis or an explicitly supplied one.
fn marginals_of_state(state: &BipartiteState, basis: Option<&Path>) -> CliResult<MarginalPair> {
    let rho1 = state.partial_trace_2().map_err(lib_err)?;
    let rho2 = state.partial_trace_1().map_err(lib_err)?;
    match basis {
        Some(path) => {
            let (mf, _) = read_matrix_file(path)?;
            let b = plain_matrix(&mf, "basis")?;
            MarginalPair::with_basis(rho1, rho2, b).map_err(lib_err)
        }
        None => MarginalPair::new(rho1, rho2).map_err(lib_err),
    }
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Extremal => "extremal",
        Verdict::NotExtremal => "not_extremal",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn certification_str(c: Certification) -> &'static str {
    match c {
        Certification::Confirmed => "confirmed",
        Certification::Refuted => "refuted",
        Certification::NotApplicable => "not_applicable",
    }
}

fn witness_block(w: &WitnessDecomposition) -> WitnessBlock {
    WitnessBlock {
        lambda: matrix_file(&w.lambda),
        state_plus: state_file(&w.state_plus),
        state_minus: state_file(&w.state_minus),
    }
}

fn cmd_check(args: CheckArgs) -> CliResult<i32> {
    let tol = resolve_tol(args.tol)?;
    let (state_mf, state_bytes) = read_matrix_file(&args.state)?;
    let (rho1_mf, rho1_bytes) = read_matrix_file(&args.rho1)?;
    let (rho2_mf, rho2_bytes) = read_matrix_file(&args.rho2)?;
    let digest = digest_hex(&[&state_bytes, &rho1_bytes, &rho2_bytes]);

    let state = bipartite_state(&state_mf, "state")?;
    let rho1 = DensityMatrix::new(plain_matrix(&rho1_mf, "rho1")?).map_err(lib_err)?;
    let rho2 = DensityMatrix::new(plain_matrix(&rho2_mf, "rho2")?).map_err(lib_err)?;
    let marginals = MarginalPair::new(rho1, rho2).map_err(lib_err)?;
    if state.local_dim() != marginals.dim() {
        return Err(data(anyhow!(
            "state local dimension {} does not match marginal dimension {}",
            state.local_dim(),
            marginals.dim()
        )));
    }

    let report = is_extremal_state(&state, &marginals, tol).map_err(lib_err)?;
    let certification = if args.exact {
        let k = kraus_from_state(&state, &marginals, tol).map_err(lib_err)?;
        Some(certification_str(certify_verdict(&k, &report)))
    } else {
        None
    };

    let file = ReportFile {
        verdict: verdict_str(report.verdict).to_string(),
        local_dim: report.d,
        ell: report.ell,
        joint_rank: report.joint_rank,
        rank_margins: [report.rank_margins.0, report.rank_margins.1],
        bound_sqrt2d: report.bound_sqrt2d,
        bound_parthasarathy: report.bound_parthasarathy,
        state_rank: report.state_rank,
        witness: report.witness.as_ref().map(witness_block),
        certification: certification.map(str::to_string),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        tolerance: tol,
        input_digest: digest,
    };

    if args.json {
        print_json(&file);
    } else {
        print_text_report(&file, report.witness.as_ref());
    }

    Ok(match report.verdict {
        Verdict::Extremal => EXIT_EXTREMAL,
        Verdict::NotExtremal => EXIT_NOT_EXTREMAL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

fn print_text_report(file: &ReportFile, witness: Option<&WitnessDecomposition>) {
    println!("verdict: {}", file.verdict);
    println!("local_dim: {}", file.local_dim);
    println!("ell: {}", file.ell);
    println!(
        "joint_rank: {} (full = {})",
        file.joint_rank,
        file.ell * file.ell
    );
    println!(
        "rank_margins: smallest_kept={:e} largest_dropped={:e}",
        file.rank_margins[0], file.rank_margins[1]
    );
    println!("bound_sqrt2d: {}", file.bound_sqrt2d);
    println!("bound_parthasarathy: {}", file.bound_parthasarathy);
    println!("state_rank: {}", file.state_rank);
    if let Some(w) = witness {
        let distance = w
            .state_plus
            .matrix()
            .max_abs_diff(w.state_minus.matrix())
            .unwrap_or(f64::NAN);
        println!("witness: present (halves differ by {distance:e} in max norm; run with --json for the matrices)");
    }
    if let Some(c) = &file.certification {
        println!("certification: {c}");
    }
    println!("tolerance: {:e}", file.tolerance);
    println!("input_digest: {}", file.input_digest);
}

// ---------------------------------------------------------------------------
// fixture
// ---------------------------------------------------------------------------

/// Parses a fixture name. The qubit_bell fixtures take a basis suffix naming
/// the 2x2 unitary whose maximally entangled vector is projected on.
fn parse_fixture(name: &str) -> CliResult<FixtureId> {
    let unknown = || {
        usage(anyhow!(
            "unknown fixture {name:?}; known: qubit_bell:identity|x|y|z, \
             d3_cyclic, d3_state_matrix, d4_cyclic"
        ))
    };
    match name {
        "d3_cyclic" => Ok(FixtureId::D3Cyclic),
        "d3_state_matrix" => Ok(FixtureId::D3StateMatrix),
        "d4_cyclic" => Ok(FixtureId::D4Cyclic),
        _ => {
            let suffix = name.strip_prefix("qubit_bell:").ok_or_else(unknown)?;
            let z = ComplexScalar::new;
            let basis = match suffix {
                "identity" => ComplexMatrix::identity(2),
                "x" => ComplexMatrix::new(
                    2,
                    2,
                    vec![z(0.0, 0.0), z(1.0, 0.0), z(1.0, 0.0), z(0.0, 0.0)],
                )
                .expect("fixed shape"),
                "y" => ComplexMatrix::new(
                    2,
                    2,
                    vec![z(0.0, 0.0), z(0.0, -1.0), z(0.0, 1.0), z(0.0, 0.0)],
                )
                .expect("fixed shape"),
                "z" => ComplexMatrix::new(
                    2,
                    2,
                    vec![z(1.0, 0.0), z(0.0, 0.0), z(0.0, 0.0), z(-1.0, 0.0)],
                )
                .expect("fixed shape"),
                _ => return Err(unknown()),
            };
            Ok(FixtureId::QubitBell(basis))
        }
    }
}

fn cmd_fixture(args: FixtureArgs) -> CliResult<i32> {
    let fixture = parse_fixture(&args.name)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))
        .map_err(data)?;
    let stem = args.name.replace(':', "_");
    let mut written = Vec::new();

    match &fixture {
        FixtureId::D3Cyclic | FixtureId::D4Cyclic => {
            let family = fixture.kraus().expect("cyclic fixtures carry a family");
            for (k, op) in family.ops().iter().enumerate() {
                let path = args.out.join(format!("{stem}_v{}.json", k + 1));
                write_json(&path, &matrix_file(op))?;
                written.push(path);
            }
        }
        FixtureId::D3StateMatrix | FixtureId::QubitBell(_) => {
            let state = fixture.state().map_err(lib_err)?;
            let path = args.out.join(format!("{stem}.json"));
            write_json(&path, &state_file(&state))?;
            written.push(path);
        }
    }

    for path in &written {
        println!("{}", path.display());
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// convert
// ---------------------------------------------------------------------------

fn emit_matrix(out: Option<&Path>, mf: &MatrixFile) -> CliResult<()> {
    match out {
        Some(path) => write_json(path, mf),
        None => {
            print_json(mf);
            Ok(())
        }
    }
}

fn cmd_convert(args: ConvertArgs) -> CliResult<i32> {
    if let Some(state_path) = &args.to_map {
        let (mf, _) = read_matrix_file(state_path)?;
        let state = bipartite_state(&mf, "state")?;
        let marginals = marginals_of_state(&state, args.basis.as_deref())?;
        let map = map_from_state(&state, &marginals).map_err(lib_err)?;
        if let Some(basis_out) = &args.emit_basis {
            write_json(basis_out, &matrix_file(marginals.eigenbasis2()))?;
        }
        emit_matrix(args.out.as_deref(), &matrix_file(map.choi()))?;
        return Ok(0);
    }

    let choi_path = args.to_state.as_ref().expect("clap enforces the group");
    let (mf, _) = read_matrix_file(choi_path)?;
    let choi = plain_matrix(&mf, "choi")?;
    let n = choi.rows();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || choi.cols() != n {
        return Err(data(anyhow!(
            "a Choi matrix must be square of size d^2; got {}x{}",
            choi.rows(),
            choi.cols()
        )));
    }
    let map = CPMapRep::from_choi(d, choi).map_err(lib_err)?;
    // The reconstruction needs only the basis identification; the marginal
    // values themselves do not enter, so a maximally mixed pair carries any
    // explicitly supplied basis (every unitary is an eigenbasis of 1/d).
    let marginals = match &args.basis {
        Some(path) => {
            let (bmf, _) = read_matrix_file(path)?;
            let b = plain_matrix(&bmf, "basis")?;
            MarginalPair::with_basis(
                DensityMatrix::maximally_mixed(d),
                DensityMatrix::maximally_mixed(d),
                b,
            )
            .map_err(lib_err)?
        }
        None => MarginalPair::maximally_mixed(d),
    };
    if let Some(basis_out) = &args.emit_basis {
        write_json(basis_out, &matrix_file(marginals.eigenbasis2()))?;
    }
    let state = state_from_map(&map, &marginals).map_err(lib_err)?;
    emit_matrix(args.out.as_deref(), &state_file(&state))?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// kraus
// ---------------------------------------------------------------------------

fn cmd_kraus(args: KrausArgs) -> CliResult<i32> {
    let tol = resolve_tol(args.tol)?;
    let (mf, _) = read_matrix_file(&args.state)?;
    let state = bipartite_state(&mf, "state")?;
    let marginals = marginals_of_state(&state, args.basis.as_deref())?;
    let family = kraus_from_state(&state, &marginals, tol).map_err(lib_err)?;
    let membership = check_membership_conditions(&family, &marginals, tol).map_err(lib_err)?;
    let (bound_sqrt2d, bound_parthasarathy) = check_rank_bounds(family.ell(), family.d());

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))
        .map_err(data)?;
    for (k, op) in family.ops().iter().enumerate() {
        let path = args.out_dir.join(format!("kraus_{}.json", k + 1));
        write_json(&path, &matrix_file(op))?;
        println!("{}", path.display());
    }
    let manifest = KrausManifest {
        ell: family.ell(),
        residual1: membership.residual1,
        residual2: membership.residual2,
        bound_sqrt2d,
        bound_parthasarathy,
    };
    let manifest_path = args.out_dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    println!("{}", manifest_path.display());
    Ok(0)
}
