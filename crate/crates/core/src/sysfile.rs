//! TOML system and storage files.
//!
//! A system file names the working interval and the four coefficient
//! matrices; a storage file names the interval and `q`. Each matrix is a list
//! of segments tiling the interval. A segment is given by expression strings
//! (`entries`), numeric values (`constant`, complex entries as `[re, im]`),
//! or linearly interpolated `samples`; every segment but the last states its
//! right `end`. Point values at breakpoints go into `overrides`.
//!
//! ```toml
//! name = "mass-spring-damper"
//! interval = [-1.0, 3.0]
//!
//! [a]
//! rows = 2
//! cols = 2
//! [[a.segments]]
//! end = 0.0
//! constant = [[0, 1], [-1, -1]]
//! [[a.segments]]
//! end = 1.0
//! entries = [["0", "1"], ["-(1 - 2*t/3)", "-1"]]
//! [[a.segments]]
//! constant = [[0, 1], [0, -1]]
//! ```
//!
//! Errors carry `file:line` locations. Serializing a parsed definition and
//! parsing the result reproduces the same matrix functions.

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::loewner::StorageCandidate;
use crate::matfun::{Segment, SegmentData};
use crate::matfun::{Expr, MatrixFunction, PiecewiseMatrixFunction};
use crate::odeflow::LtvSystem;
use crate::{CMat, CVec, Error, Interval, Result, C64};

/// Real number or `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Real(f64),
    Complex([f64; 2]),
}

impl Number {
    pub fn value(self) -> C64 {
        match self {
            Number::Real(r) => C64::new(r, 0.0),
            Number::Complex([re, im]) => C64::new(re, im),
        }
    }

    pub fn from_c64(z: C64) -> Self {
        if z.im == 0.0 {
            Number::Real(z.re)
        } else {
            Number::Complex([z.re, z.im])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub t: f64,
    pub values: Vec<Vec<Number>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<Spanned<String>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Vec<Vec<Number>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<SampleSpec>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideSpec {
    pub t: f64,
    pub constant: Vec<Vec<Number>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub segments: Vec<Spanned<SegmentSpec>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<Spanned<OverrideSpec>>,
}

/// Optional run parameters stored with a system. Command-line flags take
/// precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Number>>,
    /// Constant input value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Vec<Number>>,
    /// Initial time for `nsd` and `avstor`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    /// Initial states probed by `avstor`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Vec<Number>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub interval: Spanned<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub a: MatrixSpec,
    pub b: MatrixSpec,
    pub c: MatrixSpec,
    pub d: MatrixSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub interval: Spanned<[f64; 2]>,
    pub q: MatrixSpec,
}

/// Parsed system file.
#[derive(Clone, Debug)]
pub struct SystemDefinition {
    pub name: Option<String>,
    pub description: Option<String>,
    pub system: LtvSystem,
    pub scenario: Scenario,
}

/// Parsed storage file.
#[derive(Clone, Debug)]
pub struct StorageDefinition {
    pub name: Option<String>,
    pub description: Option<String>,
    pub q: PiecewiseMatrixFunction,
}

impl StorageDefinition {
    pub fn candidate(&self) -> Result<StorageCandidate> {
        StorageCandidate::from_piecewise(self.q.clone())
    }
}

struct Source<'a> {
    file: &'a str,
    text: &'a str,
}

impl Source<'_> {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn err(&self, span: Option<Range<usize>>, message: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.to_string(),
            line: span.map_or(0, |s| self.line(s.start)),
            message: message.into(),
        }
    }
}

fn numbers(src: &Source<'_>, span: &Range<usize>, rows: usize, cols: usize, v: &[Vec<Number>], what: &str) -> Result<CMat> {
    if v.len() != rows || v.iter().any(|r| r.len() != cols) {
        return Err(src.err(Some(span.clone()), format!("{what} must be {rows}×{cols}")));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| v[i][j].value()))
}

fn build_matrix(src: &Source<'_>, name: &str, spec: &MatrixSpec, interval: Interval) -> Result<PiecewiseMatrixFunction> {
    let (rows, cols) = (spec.rows, spec.cols);
    if spec.segments.is_empty() {
        return Err(src.err(None, format!("matrix `{name}` has no segments")));
    }
    let mut start = interval.start;
    let mut segments = Vec::with_capacity(spec.segments.len());
    for (k, seg) in spec.segments.iter().enumerate() {
        let span = seg.span();
        let s = seg.get_ref();
        let last = k + 1 == spec.segments.len();
        let end = match (s.end, last) {
            (Some(e), true) if e != interval.end => {
                return Err(src.err(Some(span), format!("last segment of `{name}` must end at {}", interval.end)))
            }
            (_, true) => interval.end,
            (Some(e), false) => e,
            (None, false) => return Err(src.err(Some(span), format!("segment {} of `{name}` needs `end`", k + 1))),
        };
        let given = [s.entries.is_some(), s.constant.is_some(), s.samples.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(src.err(
                Some(span),
                format!("segment {} of `{name}` needs exactly one of `entries`, `constant`, `samples`", k + 1),
            ));
        }
        let located = |e: Error| match e {
            Error::Parse { .. } => e,
            other => src.err(Some(span.clone()), format!("`{name}`: {other}")),
        };
        let segment = if let Some(entries) = &s.entries {
            if entries.len() != rows || entries.iter().any(|r| r.len() != cols) {
                return Err(src.err(Some(span), format!("entries of `{name}` must be {rows}×{cols}")));
            }
            for e in entries.iter().flatten() {
                if let Err(err) = Expr::parse(e.get_ref()) {
                    return Err(src.err(Some(e.span()), format!("`{name}`: {err}")));
                }
            }
            let strs: Vec<&str> = entries.iter().flatten().map(|e| e.get_ref().as_str()).collect();
            Segment::expressions(start, end, rows, cols, &strs).map_err(located)?
        } else if let Some(c) = &s.constant {
            Segment::constant(start, end, &numbers(src, &span, rows, cols, c, &format!("constant of `{name}`"))?).map_err(located)?
        } else {
            let samples = s.samples.as_ref().expect("one variant given");
            let times = samples.iter().map(|p| p.t).collect();
            let values = samples
                .iter()
                .map(|p| numbers(src, &span, rows, cols, &p.values, &format!("sample of `{name}`")))
                .collect::<Result<Vec<_>>>()?;
            Segment::sampled(start, end, times, values).map_err(located)?
        };
        segments.push(segment);
        start = end;
    }
    let mut overrides = Vec::new();
    for o in &spec.overrides {
        let span = o.span();
        let m = numbers(src, &span, rows, cols, &o.get_ref().constant, &format!("override of `{name}`"))?;
        overrides.push((o.get_ref().t, m));
    }
    let first_span = spec.segments[0].span();
    PiecewiseMatrixFunction::new(segments, overrides).map_err(|e| src.err(Some(first_span), format!("`{name}`: {e}")))
}

fn interval_of(src: &Source<'_>, iv: &Spanned<[f64; 2]>) -> Result<Interval> {
    let [a, b] = *iv.get_ref();
    Interval::new(a, b).map_err(|e| src.err(Some(iv.span()), e.to_string()))
}

fn de_error(src: &Source<'_>, e: toml::de::Error) -> Error {
    src.err(e.span(), e.message().to_string())
}

pub fn parse_system(text: &str, file: &str) -> Result<SystemDefinition> {
    let src = Source { file, text };
    let raw: SystemFile = toml::from_str(text).map_err(|e| de_error(&src, e))?;
    let interval = interval_of(&src, &raw.interval)?;
    let a = build_matrix(&src, "a", &raw.a, interval)?;
    let b = build_matrix(&src, "b", &raw.b, interval)?;
    let c = build_matrix(&src, "c", &raw.c, interval)?;
    let d = build_matrix(&src, "d", &raw.d, interval)?;
    let system = LtvSystem::new(a, b, c, d).map_err(|e| src.err(Some(raw.interval.span()), e.to_string()))?;
    let scenario = raw.scenario.unwrap_or_default();
    let check = |v: &Option<Vec<Number>>, want: usize, what: &str| -> Result<()> {
        match v {
            Some(v) if v.len() != want => Err(src.err(None, format!("scenario `{what}` has length {}, expected {want}", v.len()))),
            _ => Ok(()),
        }
    };
    check(&scenario.x0, system.n(), "x0")?;
    check(&scenario.input, system.m(), "input")?;
    for p in &scenario.probes {
        check(&Some(p.clone()), system.n(), "probes")?;
    }
    if let Some(t0) = scenario.t0 {
        if !interval.contains(t0) {
            return Err(src.err(None, format!("scenario t0 = {t0} lies outside the interval")));
        }
    }
    Ok(SystemDefinition {
        name: raw.name,
        description: raw.description,
        system,
        scenario,
    })
}

pub fn parse_storage(text: &str, file: &str) -> Result<StorageDefinition> {
    let src = Source { file, text };
    let raw: StorageFile = toml::from_str(text).map_err(|e| de_error(&src, e))?;
    let interval = interval_of(&src, &raw.interval)?;
    let q = build_matrix(&src, "q", &raw.q, interval)?;
    if q.shape().0 != q.shape().1 {
        return Err(src.err(None, "`q` must be square"));
    }
    Ok(StorageDefinition {
        name: raw.name,
        description: raw.description,
        q,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })
}

pub fn load_system(path: &Path) -> Result<SystemDefinition> {
    parse_system(&read(path)?, &path.display().to_string())
}

pub fn load_storage(path: &Path) -> Result<StorageDefinition> {
    parse_storage(&read(path)?, &path.display().to_string())
}

fn rows_of(m: &CMat) -> Vec<Vec<Number>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Number::from_c64(m[(i, j)])).collect())
        .collect()
}

fn spanned<T>(v: T) -> Spanned<T> {
    Spanned::new(0..0, v)
}

/// File representation of a matrix function. Segments whose entries are all
/// numeric constants are written as `constant`.
pub fn matrix_spec(f: &PiecewiseMatrixFunction) -> MatrixSpec {
    let (rows, cols) = f.shape();
    let n = f.segments().len();
    let segments = f
        .segments()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let end = (k + 1 < n).then_some(s.end);
            let mut spec = SegmentSpec {
                end,
                entries: None,
                constant: None,
                samples: None,
            };
            match s.data() {
                SegmentData::Expressions { entries, sources, .. } => {
                    if entries.iter().all(|e| matches!(e, Expr::Const(_))) {
                        spec.constant = Some(rows_of(&s.eval(s.start)));
                    } else {
                        spec.entries = Some(sources.chunks(cols).map(|r| r.iter().cloned().map(spanned).collect()).collect());
                    }
                }
                SegmentData::Sampled { times, values } => {
                    spec.samples = Some(
                        times
                            .iter()
                            .zip(values)
                            .map(|(&t, v)| SampleSpec { t, values: rows_of(v) })
                            .collect(),
                    );
                }
            }
            spanned(spec)
        })
        .collect();
    let overrides = f
        .overrides()
        .iter()
        .map(|(t, m)| spanned(OverrideSpec { t: *t, constant: rows_of(m) }))
        .collect();
    MatrixSpec {
        rows,
        cols,
        segments,
        overrides,
    }
}

pub fn system_to_toml(def: &SystemDefinition) -> Result<String> {
    let iv = def.system.interval();
    let scenario = (def.scenario != Scenario::default()).then(|| def.scenario.clone());
    let file = SystemFile {
        name: def.name.clone(),
        description: def.description.clone(),
        interval: spanned([iv.start, iv.end]),
        scenario,
        a: matrix_spec(&def.system.a),
        b: matrix_spec(&def.system.b),
        c: matrix_spec(&def.system.c),
        d: matrix_spec(&def.system.d),
    };
    toml::to_string(&file).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn storage_to_toml(def: &StorageDefinition) -> Result<String> {
    let iv = def.q.domain();
    let file = StorageFile {
        name: def.name.clone(),
        description: def.description.clone(),
        interval: spanned([iv.start, iv.end]),
        q: matrix_spec(&def.q),
    };
    toml::to_string(&file).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Vector from scenario numbers.
pub fn vector(v: &[Number]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|z| z.value()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MSD: &str = r#"
name = "msd"
interval = [-1.0, 3.0]

[a]
rows = 2
cols = 2
[[a.segments]]
end = 0.0
constant = [[0, 1], [-1, -1]]
[[a.segments]]
end = 1.0
entries = [["0", "1"], ["-(1 - 2*t/3)", "-1"]]
[[a.segments]]
constant = [[0, 1], [0, -1]]

[b]
rows = 2
cols = 1
[[b.segments]]
constant = [[0], [1]]

[c]
rows = 1
cols = 2
[[c.segments]]
constant = [[0, 1]]

[d]
rows = 1
cols = 1
[[d.segments]]
constant = [[0]]
"#;

    #[test]
    fn parses_and_round_trips() {
        let def = parse_system(MSD, "msd.toml").unwrap();
        assert_eq!(def.system.n(), 2);
        assert_eq!(def.system.breakpoints(), vec![0.0, 1.0]);
        let text = system_to_toml(&def).unwrap();
        let again = parse_system(&text, "rt.toml").unwrap();
        assert_eq!(again.system, def.system);
        assert_eq!(system_to_toml(&again).unwrap(), text);
    }

    #[test]
    fn bad_expression_reports_its_line() {
        let broken = MSD.replace("-(1 - 2*t/3)", "-(1 - 2*s/3)");
        match parse_system(&broken, "msd.toml") {
            Err(Error::Parse { file, line, message }) => {
                assert_eq!(file, "msd.toml");
                assert_eq!(line, 13, "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_its_line() {
        let broken = MSD.replace("rows = 2\ncols = 1", "rows = \ncols = 1");
        match parse_system(&broken, "x.toml") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 18),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shape_errors_are_located() {
        let broken = MSD.replace("constant = [[0], [1]]", "constant = [[0, 1]]");
        let e = parse_system(&broken, "x.toml").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 20, .. }), "{e}");
    }

    #[test]
    fn storage_with_override_round_trips() {
        let text = r#"
interval = [0.0, 2.0]
[q]
rows = 1
cols = 1
[[q.segments]]
end = 1.0
entries = [["2 - t"]]
[[q.segments]]
constant = [[[0.5, 0.25]]]
[[q.overrides]]
t = 1.0
constant = [[1.0]]
"#;
        let def = parse_storage(text, "q.toml").unwrap();
        let again = parse_storage(&storage_to_toml(&def).unwrap(), "rt.toml").unwrap();
        assert_eq!(again.q, def.q);
    }
}
