//! `bilag-v1` JSON documents and CSV emission.
//!
//! Documents are tagged by `kind`: `structure`, `diffeo`, `cherry`,
//! `circle_map` or `circle_diffeo`. Expressions are strings in the syntax
//! accepted by [`crate::expr::parse`]. Every schema violation names the JSON
//! path at which it was found.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cherry::{make_cherry_field, CherryError, CherryField, CherryParams, CircleDiffeo, CircleMapSample, SyntheticCherryMap};
use crate::expr::{parse, Domain, Expr};
use crate::hess::ConnectionTable;
use crate::geometry::{BiLagrangianStructure, Chart, ChartRef, DiffeoSpec, DifferentialForm, FoliationFrame, VectorField};

pub const SCHEMA: &str = "bilag-v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("cannot read `{path}`: {message}")]
    Read { path: String, message: String },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("parse error at {path}, bytes {start}..{end} of `{text}`: {message}")]
    Parse {
        path: String,
        text: String,
        start: usize,
        end: usize,
        message: String,
    },
}

/// Where a lifted document came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub lift: u8,
    pub base_sha256: String,
}

#[derive(Debug, Clone)]
pub enum CherrySpec {
    Params(CherryParams),
    /// Component expressions in `x, y` on the unit torus.
    Field([String; 2]),
}

impl CherrySpec {
    pub fn build(&self) -> Result<CherryField, CherryError> {
        match self {
            CherrySpec::Params(p) => make_cherry_field(*p),
            CherrySpec::Field(c) => {
                let comps = c.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>().map_err(crate::expr::ExprError::from)?;
                CherryField::from_field(VectorField::new(CherryField::torus(), comps)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub l1: f64,
    pub l2: f64,
    pub kappa: f64,
}

impl SyntheticSpec {
    pub fn build(&self) -> Result<SyntheticCherryMap, CherryError> {
        SyntheticCherryMap::new(self.a, self.b, self.c, self.l1, self.l2, self.kappa)
    }
}

#[derive(Debug, Clone)]
pub enum Document {
    Structure {
        structure: BiLagrangianStructure,
        provenance: Option<Provenance>,
    },
    Diffeo(DiffeoSpec),
    Cherry(CherrySpec),
    CircleMap(SyntheticSpec),
    CircleDiffeo(CircleDiffeo),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Structure { .. } => "structure",
            Document::Diffeo(_) => "diffeo",
            Document::Cherry(_) => "cherry",
            Document::CircleMap(_) => "circle_map",
            Document::CircleDiffeo(_) => "circle_diffeo",
        }
    }
}

struct Node<'a> {
    v: &'a Value,
    path: String,
}

impl<'a> Node<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, IoError> {
        Err(IoError::Schema {
            path: self.path.clone(),
            message: message.into(),
        })
    }

    fn object(&self) -> Result<&'a Map<String, Value>, IoError> {
        self.v.as_object().map_or_else(|| self.err("expected an object"), Ok)
    }

    fn only(&self, keys: &[&str]) -> Result<(), IoError> {
        for k in self.object()?.keys() {
            if !keys.contains(&k.as_str()) {
                return self.at(k).err(format!("unknown key (expected one of {keys:?})"));
            }
        }
        Ok(())
    }

    fn at(&self, key: &str) -> Node<'a> {
        Node {
            v: self.v.get(key).unwrap_or(&Value::Null),
            path: format!("{}.{key}", self.path),
        }
    }

    fn get(&self, key: &str) -> Result<Node<'a>, IoError> {
        let n = self.at(key);
        if n.v.is_null() {
            return n.err("missing required key");
        }
        Ok(n)
    }

    fn opt(&self, key: &str) -> Option<Node<'a>> {
        let n = self.at(key);
        (!n.v.is_null()).then_some(n)
    }

    fn items(&self) -> Result<Vec<Node<'a>>, IoError> {
        let a = self.v.as_array().map_or_else(|| self.err("expected an array"), Ok)?;
        Ok(a.iter()
            .enumerate()
            .map(|(i, v)| Node {
                v,
                path: format!("{}[{i}]", self.path),
            })
            .collect())
    }

    fn str(&self) -> Result<&'a str, IoError> {
        self.v.as_str().map_or_else(|| self.err("expected a string"), Ok)
    }

    fn f64(&self) -> Result<f64, IoError> {
        match self.v.as_f64() {
            Some(x) if x.is_finite() => Ok(x),
            _ => self.err("expected a finite number"),
        }
    }

    fn bool(&self) -> Result<bool, IoError> {
        self.v.as_bool().map_or_else(|| self.err("expected a boolean"), Ok)
    }

    fn expr(&self) -> Result<Expr, IoError> {
        let text = self.str()?;
        parse(text).map_err(|e| IoError::Parse {
            path: self.path.clone(),
            text: text.to_string(),
            start: e.start,
            end: e.end,
            message: e.message,
        })
    }

    fn expr_in(&self, chart: &Chart) -> Result<Expr, IoError> {
        let e = self.expr()?;
        if let Some(v) = e.variables().into_iter().find(|v| chart.index(v).is_none()) {
            return self.err(format!("unknown coordinate `{v}`"));
        }
        Ok(e)
    }

    fn fixed<const N: usize>(&self) -> Result<[f64; N], IoError> {
        let items = self.items()?;
        if items.len() != N {
            return self.err(format!("expected {N} numbers, found {}", items.len()));
        }
        let mut out = [0.0; N];
        for (o, n) in out.iter_mut().zip(&items) {
            *o = n.f64()?;
        }
        Ok(out)
    }
}

fn chart_from(n: &Node) -> Result<ChartRef, IoError> {
    n.only(&["name", "coordinates", "bounds", "periodic", "excluded"])?;
    let name = match n.opt("name") {
        Some(s) => s.str()?.to_string(),
        None => "chart".to_string(),
    };
    let coords_node = n.get("coordinates")?;
    let coords = coords_node
        .items()?
        .iter()
        .map(|c| c.str().map(str::to_string))
        .collect::<Result<Vec<_>, _>>()?;
    if coords.is_empty() {
        return coords_node.err("a chart needs at least one coordinate");
    }
    let m = coords.len();
    let periodic = match n.opt("periodic") {
        Some(p) => {
            let items = p.items()?;
            if items.len() != m {
                return p.err(format!("expected {m} flags for {m} coordinates, found {}", items.len()));
            }
            items.iter().map(Node::bool).collect::<Result<Vec<_>, _>>()?
        }
        None => vec![false; m],
    };
    let bounds = match n.opt("bounds") {
        Some(b) => {
            let items = b.items()?;
            if items.len() != m {
                return b.err(format!("expected {m} bounds for {m} coordinates, found {}", items.len()));
            }
            items.iter().map(|i| i.fixed::<2>().map(|[lo, hi]| (lo, hi))).collect::<Result<Vec<_>, _>>()?
        }
        None => periodic.iter().map(|&p| if p { (0.0, 1.0) } else { (-1.0, 1.0) }).collect(),
    };
    let domain = Domain::new(coords, bounds, periodic).or_else(|e| n.err(e.to_string()))?;
    let chart = Chart::new(name.clone(), domain).or_else(|e| coords_node.err(e.to_string()))?;
    match n.opt("excluded") {
        Some(ex) => {
            let mut disks = Vec::new();
            for d in ex.items()? {
                d.only(&["center", "radius"])?;
                let c = d.get("center")?;
                let center = c.items()?.iter().map(Node::f64).collect::<Result<Vec<_>, _>>()?;
                if center.len() != m {
                    return c.err(format!("expected {m} coordinates, found {}", center.len()));
                }
                disks.push((center, d.get("radius")?.f64()?));
            }
            Ok(chart.punctured(&name, disks))
        }
        None => Ok(chart),
    }
}

fn field_from(n: &Node, chart: &ChartRef) -> Result<VectorField, IoError> {
    let items = n.items()?;
    if items.len() != chart.dim() {
        return n.err(format!(
            "field has {} components on a {}-coordinate chart",
            items.len(),
            chart.dim()
        ));
    }
    let comps = items.iter().map(|c| c.expr_in(chart)).collect::<Result<Vec<_>, _>>()?;
    VectorField::new(chart.clone(), comps).or_else(|e| n.err(e.to_string()))
}

fn frame_from(n: &Node, chart: &ChartRef) -> Result<FoliationFrame, IoError> {
    let fields = n.items()?.iter().map(|f| field_from(f, chart)).collect::<Result<Vec<_>, _>>()?;
    if fields.is_empty() {
        return n.err("a foliation frame needs at least one field");
    }
    FoliationFrame::new(chart.clone(), fields).or_else(|e| n.err(e.to_string()))
}

fn form_from(n: &Node, chart: &ChartRef) -> Result<DifferentialForm, IoError> {
    let mut omega = DifferentialForm::zero(chart, 2);
    for t in n.items()? {
        t.only(&["wedge", "coefficient"])?;
        let w = t.get("wedge")?;
        let names = w.items()?;
        if names.len() != 2 {
            return w.err("a 2-form term wedges exactly two coordinates");
        }
        let mut idx = Vec::with_capacity(2);
        for c in &names {
            let s = c.str()?;
            idx.push(chart.index(s).map_or_else(|| c.err(format!("unknown coordinate `{s}`")), Ok)?);
        }
        let coef = t.get("coefficient")?.expr_in(chart)?;
        omega.add_term(&idx, coef).or_else(|e| t.err(e.to_string()))?;
    }
    Ok(omega)
}

fn exprs_from(n: &Node, chart: &Chart, count: usize) -> Result<Vec<Expr>, IoError> {
    let items = n.items()?;
    if items.len() != count {
        return n.err(format!("expected {count} components, found {}", items.len()));
    }
    items.iter().map(|c| c.expr_in(chart)).collect()
}

fn params_from(n: &Node) -> Result<CherryParams, IoError> {
    n.only(&["alpha", "center", "radius", "depth", "sink_strength", "tilt", "scale"])?;
    let mut p = CherryParams::default();
    for (key, slot) in [
        ("alpha", &mut p.alpha),
        ("radius", &mut p.radius),
        ("depth", &mut p.depth),
        ("sink_strength", &mut p.sink_strength),
        ("tilt", &mut p.tilt),
        ("scale", &mut p.scale),
    ] {
        if let Some(v) = n.opt(key) {
            *slot = v.f64()?;
        }
    }
    if let Some(c) = n.opt("center") {
        p.center = c.fixed::<2>()?;
    }
    Ok(p)
}

fn circle_expr(n: &Node) -> Result<Expr, IoError> {
    let e = n.expr()?;
    if let Some(v) = e.variables().into_iter().find(|v| v != CircleDiffeo::VAR) {
        return n.err(format!("unknown variable `{v}` (circle maps use `{}`)", CircleDiffeo::VAR));
    }
    Ok(e)
}

/// Parses and validates a `bilag-v1` document.
pub fn parse_document(text: &str) -> Result<Document, IoError> {
    let value: Value = serde_json::from_str(text).map_err(|e| IoError::Schema {
        path: "$".into(),
        message: format!("invalid JSON: {e}"),
    })?;
    let root = Node {
        v: &value,
        path: "$".into(),
    };
    root.object()?;
    let schema = root.get("schema")?;
    if schema.str()? != SCHEMA {
        return schema.err(format!("unsupported schema (expected `{SCHEMA}`)"));
    }
    let kind = root.get("kind")?;
    match kind.str()? {
        "structure" => {
            root.only(&["schema", "kind", "chart", "omega", "f1", "f2", "provenance"])?;
            let chart = chart_from(&root.get("chart")?)?;
            let omega = form_from(&root.get("omega")?, &chart)?;
            let f1 = frame_from(&root.get("f1")?, &chart)?;
            let f2 = frame_from(&root.get("f2")?, &chart)?;
            let structure = BiLagrangianStructure::new(omega, f1, f2).or_else(|e| root.err(e.to_string()))?;
            let provenance = match root.opt("provenance") {
                Some(p) => {
                    p.only(&["lift", "base_sha256"])?;
                    let l = p.get("lift")?;
                    let lift = match l.v.as_u64() {
                        Some(i @ 1..=3) => i as u8,
                        _ => return l.err("expected 1, 2 or 3"),
                    };
                    Some(Provenance {
                        lift,
                        base_sha256: p.get("base_sha256")?.str()?.to_string(),
                    })
                }
                None => None,
            };
            Ok(Document::Structure { structure, provenance })
        }
        "diffeo" => {
            root.only(&["schema", "kind", "chart", "target", "map", "inverse"])?;
            let source = chart_from(&root.get("chart")?)?;
            let target = match root.opt("target") {
                Some(t) => chart_from(&t)?,
                None => source.clone(),
            };
            if target.dim() != source.dim() {
                return root.at("target").err("target chart dimension differs from the source");
            }
            let map = exprs_from(&root.get("map")?, &source, target.dim())?;
            let inverse = match root.opt("inverse") {
                Some(i) => Some(exprs_from(&i, &target, source.dim())?),
                None => None,
            };
            let spec = DiffeoSpec::new(source, target, map, inverse).or_else(|e| root.err(e.to_string()))?;
            Ok(Document::Diffeo(spec))
        }
        "cherry" => {
            root.only(&["schema", "kind", "params", "field"])?;
            match (root.opt("params"), root.opt("field")) {
                (Some(_), Some(_)) => root.err("give either `params` or `field`, not both"),
                (None, Some(f)) => {
                    let torus = CherryField::torus();
                    let comps = exprs_from(&f, &torus, 2)?;
                    Ok(Document::Cherry(CherrySpec::Field([comps[0].to_string(), comps[1].to_string()])))
                }
                (p, None) => {
                    let params = match p {
                        Some(p) => params_from(&p)?,
                        None => CherryParams::default(),
                    };
                    Ok(Document::Cherry(CherrySpec::Params(params)))
                }
            }
        }
        "circle_map" => {
            root.only(&["schema", "kind", "synthetic"])?;
            let s = root.get("synthetic")?;
            s.only(&["a", "b", "c", "l1", "l2", "kappa"])?;
            let spec = SyntheticSpec {
                a: s.get("a")?.f64()?,
                b: s.get("b")?.f64()?,
                c: s.get("c")?.f64()?,
                l1: s.get("l1")?.f64()?,
                l2: s.get("l2")?.f64()?,
                kappa: match s.opt("kappa") {
                    Some(k) => k.f64()?,
                    None => 1.0,
                },
            };
            spec.build().or_else(|e| s.err(e.to_string()))?;
            Ok(Document::CircleMap(spec))
        }
        "circle_diffeo" => {
            root.only(&["schema", "kind", "map", "inverse"])?;
            let map = circle_expr(&root.get("map")?)?;
            let inverse = match root.opt("inverse") {
                Some(i) => Some(circle_expr(&i)?),
                None => None,
            };
            let phi = CircleDiffeo::new(map, inverse).or_else(|e| root.err(e.to_string()))?;
            Ok(Document::CircleDiffeo(phi))
        }
        other => kind.err(format!(
            "unknown kind `{other}` (expected structure, diffeo, cherry, circle_map or circle_diffeo)"
        )),
    }
}

pub fn read_document(path: &std::path::Path) -> Result<Document, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_document(&text)
}

/// Reads a structure or Cherry field document.
pub fn parse_structure_file(path: &std::path::Path) -> Result<Document, IoError> {
    let doc = read_document(path)?;
    match doc {
        Document::Structure { .. } | Document::Cherry(_) => Ok(doc),
        other => Err(IoError::Schema {
            path: "$.kind".into(),
            message: format!("expected a structure or cherry document, found `{}`", other.kind()),
        }),
    }
}

pub fn chart_json(chart: &Chart) -> Value {
    let mut v = json!({
        "name": chart.name,
        "coordinates": chart.coords(),
        "bounds": chart.domain.bounds.iter().map(|&(lo, hi)| [lo, hi]).collect::<Vec<_>>(),
        "periodic": chart.domain.periodic,
    });
    if !chart.excluded.is_empty() {
        v["excluded"] = chart
            .excluded
            .iter()
            .map(|(c, r)| json!({"center": c, "radius": r}))
            .collect();
    }
    v
}

fn field_json(f: &VectorField) -> Value {
    f.comps.iter().map(|e| Value::String(e.to_string())).collect()
}

pub fn form_json(omega: &DifferentialForm) -> Value {
    let coords = omega.chart.coords();
    omega
        .terms()
        .map(|(idx, c)| {
            json!({
                "wedge": idx.iter().map(|&i| coords[i].as_str()).collect::<Vec<_>>(),
                "coefficient": c.to_string(),
            })
        })
        .collect()
}

pub fn structure_json(b: &BiLagrangianStructure, provenance: Option<&Provenance>) -> Value {
    let mut v = json!({
        "schema": SCHEMA,
        "kind": "structure",
        "chart": chart_json(&b.chart),
        "omega": form_json(&b.omega),
        "f1": b.f1.fields.iter().map(field_json).collect::<Vec<_>>(),
        "f2": b.f2.fields.iter().map(field_json).collect::<Vec<_>>(),
    });
    if let Some(p) = provenance {
        v["provenance"] = json!({"lift": p.lift, "base_sha256": p.base_sha256});
    }
    v
}

pub fn diffeo_json(psi: &DiffeoSpec) -> Value {
    let strings = |es: &[Expr]| es.iter().map(|e| Value::String(e.to_string())).collect::<Value>();
    let mut v = json!({
        "schema": SCHEMA,
        "kind": "diffeo",
        "chart": chart_json(&psi.source),
        "map": strings(&psi.map),
    });
    if !psi.target.same_as(&psi.source) {
        v["target"] = chart_json(&psi.target);
    }
    if let Some(inv) = &psi.inverse {
        v["inverse"] = strings(inv);
    }
    v
}

pub fn cherry_json(spec: &CherrySpec) -> Value {
    match spec {
        CherrySpec::Params(p) => json!({"schema": SCHEMA, "kind": "cherry", "params": p}),
        CherrySpec::Field(c) => json!({"schema": SCHEMA, "kind": "cherry", "field": c}),
    }
}

/// Frame expressions and `gamma[i][j][k]` with `∇_{E_i}E_j = Σ_k gamma[i][j][k] E_k`.
pub fn connection_json(c: &ConnectionTable) -> Value {
    json!({
        "chart": chart_json(&c.chart),
        "frame": c.frame.iter().map(field_json).collect::<Vec<_>>(),
        "gamma": c
            .gamma
            .iter()
            .map(|row| row.iter().map(|g| g.iter().map(|e| e.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

/// SHA-256 of the compact serialization of a document.
pub fn document_sha256(doc: &Value) -> String {
    let bytes = serde_json::to_vec(doc).expect("JSON values serialize");
    let mut out = String::with_capacity(64);
    for b in Sha256::digest(&bytes) {
        write!(out, "{b:02x}").expect("writing to a String");
    }
    out
}

/// Rows `x,f,captured,branch`; `f` is the lift (empty when captured) and
/// `branch` its integer part.
pub fn circle_sample_csv(s: &CircleMapSample) -> String {
    let mut out = String::from("x,f,captured,branch\n");
    for ((x, v), br) in s.xs.iter().zip(&s.values).zip(s.branches()) {
        let f = v.map(|v| format!("{v:?}")).unwrap_or_default();
        let b = br.map(|b| b.to_string()).unwrap_or_default();
        writeln!(out, "{x:?},{f},{},{b}", v.is_none()).expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{approx_equal, SYMBOLIC_TOL};
    use crate::geometry::{validate_bilagrangian, Samples};

    const CANONICAL: &str = r#"{
        "schema": "bilag-v1", "kind": "structure",
        "chart": {"name": "R2", "coordinates": ["p", "q"], "bounds": [[-1, 1], [-1, 1]]},
        "omega": [{"wedge": ["q", "p"], "coefficient": "1"}],
        "f1": [["1", "0"]],
        "f2": [["0", "1"]]
    }"#;

    fn schema_path(text: &str) -> String {
        match parse_document(text) {
            Err(IoError::Schema { path, .. }) => path,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn canonical_document_is_valid() {
        let Document::Structure { structure, provenance } = parse_document(CANONICAL).unwrap() else {
            panic!("wrong kind");
        };
        assert!(provenance.is_none());
        assert!(validate_bilagrangian(&structure, Samples::new(20)).pass);
        let w = structure.omega.component(&[0, 1]);
        assert_eq!(w.to_string(), "-1");
    }

    #[test]
    fn schema_errors_carry_paths() {
        let three = CANONICAL.replace(r#""f1": [["1", "0"]]"#, r#""f1": [["1", "0", "0"]]"#);
        assert_eq!(schema_path(&three), "$.f1[0]");
        assert_eq!(schema_path(&CANONICAL.replace("bilag-v1", "bilag-v0")), "$.schema");
        assert_eq!(schema_path(&CANONICAL.replace(r#"["q", "p"]"#, r#"["q", "r"]"#)), "$.omega[0].wedge[1]");
        assert_eq!(schema_path(&CANONICAL.replace(r#""f2""#, r#""f3""#)), "$.f3");
        assert_eq!(schema_path(&CANONICAL.replace(r#"["0", "1"]"#, r#"["0", "z"]"#)), "$.f2[0][1]");
        assert_eq!(schema_path("[1]"), "$");
        assert_eq!(schema_path("{"), "$");
    }

    #[test]
    fn parse_errors_carry_spans() {
        let bad = CANONICAL.replace(r#""coefficient": "1""#, r#""coefficient": "1 + * p""#);
        match parse_document(&bad) {
            Err(IoError::Parse { path, start, end, .. }) => {
                assert_eq!(path, "$.omega[0].coefficient");
                assert!(start < end && end <= 7);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structure_round_trip() {
        let Document::Structure { structure, .. } = parse_document(CANONICAL).unwrap() else { unreachable!() };
        let prov = Provenance {
            lift: 2,
            base_sha256: "ab".repeat(32),
        };
        let v = structure_json(&structure, Some(&prov));
        let Document::Structure { structure: again, provenance } = parse_document(&v.to_string()).unwrap() else {
            unreachable!()
        };
        assert_eq!(provenance, Some(prov));
        assert_eq!(structure_json(&again, provenance.as_ref()), v);
        assert_eq!(document_sha256(&v).len(), 64);
    }

    #[test]
    fn cherry_round_trip() {
        let p = CherryParams {
            tilt: 0.3,
            alpha: 0.4,
            ..Default::default()
        };
        let v = cherry_json(&CherrySpec::Params(p));
        match parse_document(&v.to_string()).unwrap() {
            Document::Cherry(CherrySpec::Params(q)) => assert_eq!(p, q),
            other => panic!("{other:?}"),
        }
        let defaults = r#"{"schema": "bilag-v1", "kind": "cherry"}"#;
        assert!(matches!(
            parse_document(defaults).unwrap(),
            Document::Cherry(CherrySpec::Params(q)) if q == CherryParams::default()
        ));
        let unknown = r#"{"schema": "bilag-v1", "kind": "cherry", "params": {"alpah": 0.5}}"#;
        assert_eq!(schema_path(unknown), "$.params.alpah");
        let field = r#"{"schema": "bilag-v1", "kind": "cherry", "field": ["1", "0.5 + 0.1*sin(2*pi*x)"]}"#;
        let Document::Cherry(spec) = parse_document(field).unwrap() else { unreachable!() };
        assert!(spec.build().unwrap().singularities().is_empty());
    }

    #[test]
    fn diffeo_round_trip() {
        let text = r#"{
            "schema": "bilag-v1", "kind": "diffeo",
            "chart": {"coordinates": ["p", "q"], "bounds": [[-1, 1], [-1, 1]]},
            "map": ["p", "q + p^2"], "inverse": ["p", "q - p^2"]
        }"#;
        let Document::Diffeo(psi) = parse_document(text).unwrap() else { unreachable!() };
        let Document::Diffeo(again) = parse_document(&diffeo_json(&psi).to_string()).unwrap() else { unreachable!() };
        for (a, b) in psi.map.iter().zip(&again.map) {
            assert!(approx_equal(a, b, &psi.source.domain, 20, SYMBOLIC_TOL).unwrap().equal);
        }
        assert!(psi.check_inverse(Samples::new(20)).unwrap() < 1e-12);
    }

    #[test]
    fn circle_documents() {
        let m = r#"{"schema": "bilag-v1", "kind": "circle_map", "synthetic": {"a": 0.3, "b": 0.5, "c": 0.2, "l1": 2, "l2": 3}}"#;
        assert!(matches!(parse_document(m).unwrap(), Document::CircleMap(s) if s.kappa == 1.0));
        let bad = m.replace(r#""l1": 2"#, r#""l1": -2"#);
        assert_eq!(schema_path(&bad), "$.synthetic");
        let phi = r#"{"schema": "bilag-v1", "kind": "circle_diffeo", "map": "x + 0.05*sin(2*pi*x)"}"#;
        assert!(matches!(parse_document(phi).unwrap(), Document::CircleDiffeo(_)));
        assert_eq!(schema_path(&phi.replace("2*pi*x", "2*pi*y")), "$.map");
    }

    #[test]
    fn csv_rows() {
        let s = CircleMapSample::from_values(vec![0.0, 0.5], vec![Some(1.25), None]);
        assert_eq!(circle_sample_csv(&s), "x,f,captured,branch\n0.0,1.25,false,1\n0.5,,true,\n");
    }
}
