//! Command-line front end. [`run_command`] parses an argument vector, runs
//! one subcommand and returns the exit code together with everything it
//! printed and wrote, so it can be driven in-process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::cherry::{
    analyze_flat, cherry_pair_hess, conjugate_map, equivariance_check, first_return_map, glue_maps, rotation_number,
    well_definedness_sample, CherryConnection, CherryField, CircleDiffeo, CircleMap, CircleMapSample, FlatAnalysis,
    ReturnMap, ReturnOptions, SyntheticCherryMap, TorusMap, CAPTURE_RADIUS, EXCLUSION_RADIUS,
};
use crate::expr::DEFAULT_SEED;
use crate::geometry::{adapted_chart_check, validate_bilagrangian, BiLagrangianStructure, DiffeoSpec, Samples};
use crate::hess::{hess_connection, hess_verify, pushforward_structure, uniqueness_probe, HESS_TOL};
use crate::io::{
    self, circle_sample_csv, connection_json, document_sha256, structure_json, CherrySpec, Document, IoError,
    Provenance,
};
use crate::lifts::{build_lifted_structure, diagram_commutes, LiftedStructureId};

const ROTATION_ITERATES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Seed for sample points.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Number of check points.
    #[arg(long, global = true, default_value_t = 50)]
    pub samples: usize,
    /// Residual tolerance (hess --check) or ODE tolerance (cherry).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Grid size for circle maps and restricted connections.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Time cap for return-map orbits.
    #[arg(long, global = true, default_value_t = 500.0)]
    pub tmax: f64,
    /// Directory receiving the report and any CSV files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl RunConfig {
    fn samples(&self) -> Samples {
        Samples::with_seed(self.samples, self.seed)
    }

    fn return_options(&self) -> ReturnOptions {
        let d = ReturnOptions::default();
        ReturnOptions {
            tmax: self.tmax,
            tol: self.tol.unwrap_or(d.tol),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bilag", version, about = "Bi-Lagrangian structures, Hess connections, lifts and Cherry flows")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a structure document is bi-Lagrangian.
    Verify { file: PathBuf },
    /// Compute the Hess connection table.
    Hess {
        file: PathBuf,
        /// Also verify the defining properties and run the uniqueness probe.
        #[arg(long)]
        check: bool,
    },
    /// Build the lifted structure on TM (i = 3) or T*M (i = 1, 2).
    Lift {
        file: PathBuf,
        #[arg(long = "i", value_parser = clap::value_parser!(u8).range(1..=3))]
        i: u8,
    },
    /// Push a structure forward along a diffeomorphism.
    Push {
        file: PathBuf,
        #[arg(long)]
        map: PathBuf,
    },
    /// Compare the lift of a pushed structure with the push of the lift.
    Diagram {
        file: PathBuf,
        #[arg(long = "i", value_parser = clap::value_parser!(u8).range(1..=3))]
        i: u8,
        #[arg(long)]
        map: PathBuf,
    },
    /// Cherry flows on the torus and their circle maps.
    #[command(subcommand)]
    Cherry(CherryCommand),
}

#[derive(Debug, Subcommand)]
pub enum CherryCommand {
    /// Sample the first-return map of a field.
    Sim { file: PathBuf },
    /// Glue two maps whose flat pieces overlap.
    Glue { first: PathBuf, second: PathBuf },
    /// Conjugate a map by a circle diffeomorphism.
    Conj {
        file: PathBuf,
        #[arg(long)]
        phi: PathBuf,
    },
    /// Hess connection of a transversal pair on the punctured torus.
    Connection {
        x: PathBuf,
        y: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        circle_y: f64,
        /// Candidate pair `X Y` compared against the reference pair.
        #[arg(long, num_args = 2, value_names = ["X", "Y"])]
        candidate: Vec<PathBuf>,
    },
    /// Compare the return map of a pushed field with the conjugated map.
    Equivariance {
        file: PathBuf,
        #[arg(long)]
        map: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify { .. } => "verify",
            Command::Hess { .. } => "hess",
            Command::Lift { .. } => "lift",
            Command::Push { .. } => "push",
            Command::Diagram { .. } => "diagram",
            Command::Cherry(c) => match c {
                CherryCommand::Sim { .. } => "cherry-sim",
                CherryCommand::Glue { .. } => "cherry-glue",
                CherryCommand::Conj { .. } => "cherry-conj",
                CherryCommand::Connection { .. } => "cherry-connection",
                CherryCommand::Equivariance { .. } => "cherry-equivariance",
            },
        }
    }
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    /// `(file name, contents)` for everything written to `--out`.
    pub artifacts: Vec<(String, String)>,
}

enum Failure {
    Usage(String),
    Schema(IoError),
    Failed(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure::Failed(e.to_string())
    }
}

fn schema(e: IoError) -> Failure {
    Failure::Schema(e)
}

struct Report {
    pass: bool,
    reason: Option<String>,
    body: Value,
    csv: Option<String>,
    documents: Vec<(String, Value)>,
}

impl Report {
    fn new(pass: bool, reason: Option<String>, body: Value) -> Report {
        Report {
            pass,
            reason,
            body,
            csv: None,
            documents: Vec::new(),
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn structure_doc(path: &Path) -> Result<(BiLagrangianStructure, Option<Provenance>), Failure> {
    match io::parse_structure_file(path).map_err(schema)? {
        Document::Structure { structure, provenance } => Ok((structure, provenance)),
        other => Err(Failure::Usage(format!(
            "`{}` is a {} document; this command needs a structure",
            path.display(),
            other.kind()
        ))),
    }
}

fn diffeo_doc(path: &Path) -> Result<DiffeoSpec, Failure> {
    match io::read_document(path).map_err(schema)? {
        Document::Diffeo(d) => Ok(d),
        other => Err(Failure::Usage(format!(
            "`{}` is a {} document; expected a diffeo",
            path.display(),
            other.kind()
        ))),
    }
}

fn cherry_doc(path: &Path) -> Result<(CherrySpec, CherryField), Failure> {
    match io::read_document(path).map_err(schema)? {
        Document::Cherry(spec) => {
            let field = spec.build()?;
            Ok((spec, field))
        }
        other => Err(Failure::Usage(format!(
            "`{}` is a {} document; expected a cherry field",
            path.display(),
            other.kind()
        ))),
    }
}

enum MapSource {
    Field(CherryField),
    Synthetic(SyntheticCherryMap),
}

impl MapSource {
    fn load(path: &Path) -> Result<(MapSource, Value), Failure> {
        match io::read_document(path).map_err(schema)? {
            Document::Cherry(spec) => Ok((MapSource::Field(spec.build()?), io::cherry_json(&spec))),
            Document::CircleMap(s) => Ok((
                MapSource::Synthetic(s.build()?),
                json!({"synthetic": {"a": s.a, "b": s.b, "c": s.c, "l1": s.l1, "l2": s.l2, "kappa": s.kappa}}),
            )),
            other => Err(Failure::Usage(format!(
                "`{}` is a {} document; expected a cherry field or circle map",
                path.display(),
                other.kind()
            ))),
        }
    }

    fn map(&self, opts: ReturnOptions) -> Box<dyn CircleMap + '_> {
        match self {
            MapSource::Field(f) => Box::new(ReturnMap {
                field: f,
                sink: f.sink(),
                opts,
            }),
            MapSource::Synthetic(s) => Box::new(*s),
        }
    }
}

/// Samples `map`, attaches the flat-piece analysis when part of the grid is
/// captured, and estimates the rotation number.
fn analyzed(map: &dyn CircleMap, grid: usize) -> Result<(CircleMapSample, Option<FlatAnalysis>), Failure> {
    let s = CircleMapSample::sample(map, grid)?;
    s.monotone_check()?;
    let (mut s, an) = if s.captured() > 0 {
        let an = analyze_flat(map, &s)?;
        (s.with_analysis(&an), Some(an))
    } else {
        (s, None)
    };
    let fill = s.flat.zip(s.c);
    s.rotation = Some(rotation_number(&s, fill, ROTATION_ITERATES)?);
    Ok((s, an))
}

fn sample_meta(s: &CircleMapSample) -> Value {
    json!({
        "grid": s.grid(),
        "captured": s.captured(),
        "flat": s.flat,
        "c": s.c,
        "exponents": s.exponents,
        "rotation": s.rotation,
    })
}

fn verify(cfg: &RunConfig, file: &Path) -> Result<Report, Failure> {
    let (b, _) = structure_doc(file)?;
    let report = validate_bilagrangian(&b, cfg.samples());
    let adapted = adapted_chart_check(&b, cfg.samples())?;
    let reason = (!report.pass).then(|| report.reasons.join("; "));
    Ok(Report::new(
        report.pass,
        reason,
        json!({"validation": report, "adapted": adapted, "samples": cfg.samples, "seed": cfg.seed}),
    ))
}

fn hess(cfg: &RunConfig, file: &Path, check: bool) -> Result<Report, Failure> {
    let (b, _) = structure_doc(file)?;
    let table = hess_connection(&b, cfg.samples())?;
    let max_curvature = table.max_curvature(cfg.samples())?;
    let mut body = json!({
        "connection": connection_json(&table),
        "max_curvature": max_curvature,
        "flat": max_curvature <= HESS_TOL,
        "samples": cfg.samples,
        "seed": cfg.seed,
    });
    if !check {
        return Ok(Report::new(true, None, body));
    }
    let tol = cfg.tol.unwrap_or(HESS_TOL);
    let report = hess_verify(&table, &b, cfg.samples(), tol)?;
    let probe = uniqueness_probe(&table, &b, cfg.samples())?;
    let pass = report.pass && probe <= tol;
    let reason = (!pass).then(|| {
        format!(
            "residuals torsion {:e}, parallel {:e}, preservation {:e}, uniqueness {probe:e} against tolerance {tol:e}",
            report.torsion, report.parallel, report.preservation
        )
    });
    body["verify"] = to_value(&report);
    body["uniqueness_residual"] = json!(probe);
    Ok(Report::new(pass, reason, body))
}

fn lift(cfg: &RunConfig, file: &Path, i: u8) -> Result<Report, Failure> {
    let (b, prov) = structure_doc(file)?;
    let id = LiftedStructureId::new(i)?;
    let lifted = build_lifted_structure(&b, id, cfg.samples())?;
    let report = validate_bilagrangian(&lifted.structure, cfg.samples());
    let provenance = Provenance {
        lift: i,
        base_sha256: document_sha256(&structure_json(&b, prov.as_ref())),
    };
    let doc = structure_json(&lifted.structure, Some(&provenance));
    let reason = (!report.pass).then(|| report.reasons.join("; "));
    let mut r = Report::new(
        report.pass,
        reason,
        json!({"i": i, "bundle": id.bundle(), "validation": report, "document": doc}),
    );
    r.documents.push((format!("lift-i{i}.json"), doc));
    Ok(r)
}

fn push(cfg: &RunConfig, file: &Path, map: &Path) -> Result<Report, Failure> {
    let (b, _) = structure_doc(file)?;
    let psi = diffeo_doc(map)?;
    let pushed = pushforward_structure(&psi, &b)?;
    let report = validate_bilagrangian(&pushed, cfg.samples());
    let doc = structure_json(&pushed, None);
    let reason = (!report.pass).then(|| report.reasons.join("; "));
    let mut r = Report::new(report.pass, reason, json!({"validation": report, "document": doc}));
    r.documents.push(("pushed.json".into(), doc));
    Ok(r)
}

fn diagram(cfg: &RunConfig, file: &Path, i: u8, map: &Path) -> Result<Report, Failure> {
    let (b, _) = structure_doc(file)?;
    let psi = diffeo_doc(map)?;
    let report = diagram_commutes(&b, &psi, LiftedStructureId::new(i)?, cfg.samples())?;
    let reason = (!report.commutes).then(|| {
        if report.forms_agree {
            "neither lifted foliation is carried onto its counterpart".to_string()
        } else {
            format!("lifted symplectic forms differ by {:e}", report.form_error)
        }
    });
    Ok(Report::new(report.commutes, reason, json!({"diagram": report})))
}

fn cherry_sim(cfg: &RunConfig, file: &Path) -> Result<Report, Failure> {
    let (spec, field) = cherry_doc(file)?;
    let opts = cfg.return_options();
    let s = first_return_map(&field, cfg.grid.unwrap_or(512), opts)?;
    let pass = s.flat.is_some();
    let reason = (!pass).then(|| "no orbit is captured, so the return map has no flat piece".to_string());
    let mut r = Report::new(
        pass,
        reason,
        json!({
            "field": io::cherry_json(&spec),
            "singularities": field.singularities(),
            "return_map": sample_meta(&s),
            "tolerances": {"ode": opts.tol, "tmax": opts.tmax, "capture_radius": CAPTURE_RADIUS},
        }),
    );
    r.csv = Some(circle_sample_csv(&s));
    Ok(r)
}

fn cherry_glue(cfg: &RunConfig, first: &Path, second: &Path) -> Result<Report, Failure> {
    let grid = cfg.grid.unwrap_or(512);
    let opts = cfg.return_options();
    let (src1, desc1) = MapSource::load(first)?;
    let (src2, desc2) = MapSource::load(second)?;
    let (m1, m2) = (src1.map(opts), src2.map(opts));
    let (s1, an1) = analyzed(&*m1, grid)?;
    let (s2, an2) = analyzed(&*m2, grid)?;
    let (Some(an1), Some(an2)) = (an1, an2) else {
        return Ok(Report::new(
            false,
            Some("both maps need a flat piece".into()),
            json!({"inputs": [sample_meta(&s1), sample_meta(&s2)]}),
        ));
    };
    let glued = match glue_maps(&*m1, &an1, &*m2, &an2) {
        Ok(g) => g,
        Err(e) => {
            return Ok(Report::new(
                false,
                Some(e.to_string()),
                json!({"inputs": [sample_meta(&s1), sample_meta(&s2)]}),
            ))
        }
    };
    let (s, _) = analyzed(&glued, grid)?;
    let mut r = Report::new(
        true,
        None,
        json!({
            "sources": [desc1, desc2],
            "inputs": [sample_meta(&s1), sample_meta(&s2)],
            "glued": sample_meta(&s),
            "split": glued.split,
        }),
    );
    r.csv = Some(circle_sample_csv(&s));
    Ok(r)
}

fn cherry_conj(cfg: &RunConfig, file: &Path, phi: &Path) -> Result<Report, Failure> {
    let grid = cfg.grid.unwrap_or(512);
    let (src, desc) = MapSource::load(file)?;
    let phi: CircleDiffeo = match io::read_document(phi).map_err(schema)? {
        Document::CircleDiffeo(p) => p,
        other => {
            return Err(Failure::Usage(format!(
                "`{}` is a {} document; expected a circle_diffeo",
                phi.display(),
                other.kind()
            )))
        }
    };
    let m = src.map(cfg.return_options());
    let (s, _) = analyzed(&*m, grid)?;
    let mut out = conjugate_map(&phi, &*m, &s)?;
    out.rotation = Some(rotation_number(&out, out.flat.zip(out.c), ROTATION_ITERATES)?);
    let rotation_difference = match (&s.rotation, &out.rotation) {
        (Some(a), Some(b)) => Some((a.value - b.value).abs()),
        _ => None,
    };
    let mut r = Report::new(
        true,
        None,
        json!({
            "source": desc,
            "phi": {"map": phi.expr.to_string(), "inverse": phi.inverse.as_ref().map(|e| e.to_string())},
            "map": sample_meta(&s),
            "conjugated": sample_meta(&out),
            "rotation_difference": rotation_difference,
        }),
    );
    r.csv = Some(circle_sample_csv(&out));
    Ok(r)
}

fn connection_csv(c: &CherryConnection) -> String {
    let mut out = String::from("x,g_xxx,g_yxx,g_xyy,g_yyy");
    for i in ["x", "y"] {
        for j in ["x", "y"] {
            for k in ["x", "y"] {
                write!(out, ",c_{i}{j}{k}").expect("writing to a String");
            }
        }
    }
    out.push('\n');
    for ((x, f), t) in c.xs.iter().zip(&c.frame_coefficients).zip(&c.christoffel) {
        write!(out, "{x:?}").expect("writing to a String");
        for v in f.iter().chain(t.iter().flatten().flatten()) {
            write!(out, ",{v:?}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

fn cherry_connection(cfg: &RunConfig, x: &Path, y: &Path, circle_y: f64, candidates: &[PathBuf]) -> Result<Report, Failure> {
    let grid = cfg.grid.unwrap_or(64);
    let (_, fx) = cherry_doc(x)?;
    let (_, fy) = cherry_doc(y)?;
    let conn = cherry_pair_hess(&fx, &fy, circle_y, grid, cfg.samples())?;
    let mut body = json!({
        "omega": "dx^dy",
        "exclusion_radius": EXCLUSION_RADIUS,
        "circle_y": circle_y,
        "grid": grid,
        "hess": conn.report,
    });
    let pass = conn.report.pass;
    let reason = (!pass).then(|| {
        format!(
            "Hess residuals torsion {:e}, parallel {:e}, preservation {:e} exceed {:e}",
            conn.report.torsion, conn.report.parallel, conn.report.preservation, conn.report.tol
        )
    });
    if !candidates.is_empty() {
        let pairs = candidates
            .chunks(2)
            .map(|p| Ok((cherry_doc(&p[0])?.1, cherry_doc(&p[1])?.1)))
            .collect::<Result<Vec<_>, Failure>>()?;
        let refs: Vec<(&CherryField, &CherryField)> = pairs.iter().map(|(a, b)| (a, b)).collect();
        let wd = well_definedness_sample(&refs, (&fx, &fy), circle_y, grid, cfg.return_options(), cfg.samples())?;
        body["well_definedness"] = to_value(&wd);
    }
    let mut r = Report::new(pass, reason, body);
    r.csv = Some(connection_csv(&conn));
    Ok(r)
}

fn cherry_equivariance(cfg: &RunConfig, file: &Path, map: &Path) -> Result<Report, Failure> {
    let (_, field) = cherry_doc(file)?;
    let psi = TorusMap::new(diffeo_doc(map)?)?;
    let report = equivariance_check(&field, &psi, cfg.grid.unwrap_or(256), cfg.return_options())?;
    let reason = (!report.pass).then(|| format!("sup distance {:e} exceeds {:e}", report.distance, report.tol));
    Ok(Report::new(report.pass, reason, json!({"equivariance": report})))
}

fn dispatch(cfg: &RunConfig, cmd: &Command) -> Result<Report, Failure> {
    match cmd {
        Command::Verify { file } => verify(cfg, file),
        Command::Hess { file, check } => hess(cfg, file, *check),
        Command::Lift { file, i } => lift(cfg, file, *i),
        Command::Push { file, map } => push(cfg, file, map),
        Command::Diagram { file, i, map } => diagram(cfg, file, *i, map),
        Command::Cherry(c) => match c {
            CherryCommand::Sim { file } => cherry_sim(cfg, file),
            CherryCommand::Glue { first, second } => cherry_glue(cfg, first, second),
            CherryCommand::Conj { file, phi } => cherry_conj(cfg, file, phi),
            CherryCommand::Connection {
                x,
                y,
                circle_y,
                candidate,
            } => cherry_connection(cfg, x, y, *circle_y, candidate),
            CherryCommand::Equivariance { file, map } => cherry_equivariance(cfg, file, map),
        },
    }
}

fn envelope(command: &str, pass: bool, reason: Option<String>, error: Option<&str>, body: Value) -> Value {
    let mut m = Map::new();
    m.insert("schema".into(), json!(io::SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert("pass".into(), json!(pass));
    m.insert("reason".into(), json!(reason));
    if let Some(e) = error {
        m.insert("error".into(), json!(e));
    }
    if let Value::Object(b) = body {
        m.extend(b);
    }
    Value::Object(m)
}

fn failure_outcome(command: &str, code: i32, kind: &str, reason: String) -> Outcome {
    Outcome {
        code,
        stdout: pretty(&envelope(command, false, Some(reason), Some(kind), json!({}))),
        artifacts: Vec::new(),
    }
}

/// Parses `argv` (program name first) and runs the subcommand. Exit codes:
/// 0 pass, 1 verification failure, 2 usage or schema error.
pub fn run_command<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome {
                    code: 0,
                    stdout: e.to_string(),
                    artifacts: Vec::new(),
                };
            }
            return failure_outcome("usage", 2, "usage", e.render().to_string().trim_end().to_string());
        }
    };
    let name = cli.command.name();
    let report = match dispatch(&cli.config, &cli.command) {
        Ok(r) => r,
        Err(Failure::Usage(m)) => return failure_outcome(name, 2, "usage", m),
        Err(Failure::Schema(e)) => return failure_outcome(name, 2, "schema", e.to_string()),
        Err(Failure::Failed(m)) => return failure_outcome(name, 1, "computation", m),
    };
    let json_text = pretty(&envelope(name, report.pass, report.reason, None, report.body));
    let mut artifacts = vec![(format!("{name}.json"), json_text.clone())];
    if let Some(csv) = &report.csv {
        artifacts.push((format!("{name}.csv"), csv.clone()));
    }
    for (file, doc) in &report.documents {
        artifacts.push((file.clone(), pretty(doc)));
    }
    let stdout = match (&report.csv, cli.config.format) {
        (Some(csv), Format::Csv) => csv.clone(),
        _ => json_text,
    };
    let code = if report.pass { 0 } else { 1 };
    if let Some(dir) = &cli.config.out {
        let written = std::fs::create_dir_all(dir)
            .and_then(|_| artifacts.iter().try_for_each(|(f, text)| std::fs::write(dir.join(f), text)));
        if let Err(e) = written {
            return failure_outcome(name, 2, "usage", format!("cannot write to `{}`: {e}", dir.display()));
        }
    }
    Outcome { code, stdout, artifacts }
}
