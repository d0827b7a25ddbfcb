use crate::grid::matches_point;
use crate::matfun::{Expr, MatrixFunction};
use crate::{CMat, Error, Interval, Result, C64};

const POLE_SCAN_NODES: usize = 257;

/// Entry data of one segment.
#[derive(Clone, Debug, PartialEq)]
pub enum SegmentData {
    /// Row-major closed-form entries with their symbolic derivatives.
    Expressions {
        entries: Vec<Expr>,
        derivatives: Vec<Expr>,
        sources: Vec<String>,
    },
    /// Samples joined by linear interpolation.
    Sampled { times: Vec<f64>, values: Vec<CMat> },
}

/// One smooth piece `[start, end)` of a [`PiecewiseMatrixFunction`].
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    rows: usize,
    cols: usize,
    data: SegmentData,
}

impl Segment {
    /// Closed-form segment from expression strings in row-major order.
    pub fn expressions(
        start: f64,
        end: f64,
        rows: usize,
        cols: usize,
        sources: &[&str],
    ) -> Result<Segment> {
        let entries = sources
            .iter()
            .map(|s| Expr::parse(s))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let sources = sources.iter().map(|s| s.to_string()).collect();
        Self::build(start, end, rows, cols, entries, sources)
    }

    /// Constant segment.
    pub fn constant(start: f64, end: f64, value: &CMat) -> Result<Segment> {
        let (rows, cols) = value.shape();
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(Expr::Const(value[(i, j)]));
            }
        }
        let sources = entries.iter().map(|e| e.to_string()).collect();
        Self::build(start, end, rows, cols, entries, sources)
    }

    fn build(
        start: f64,
        end: f64,
        rows: usize,
        cols: usize,
        entries: Vec<Expr>,
        sources: Vec<String>,
    ) -> Result<Segment> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "segment [{start}, {end}) has {} entries, expected {rows}×{cols}",
                entries.len()
            )));
        }
        Interval::new(start, end)
            .map_err(|e| Error::InvalidSegment(e.to_string()))?;
        let derivatives = entries.iter().map(Expr::derivative).collect();
        let seg = Segment {
            start,
            end,
            rows,
            cols,
            data: SegmentData::Expressions {
                entries,
                derivatives,
                sources,
            },
        };
        seg.check_poles()?;
        Ok(seg)
    }

    /// Sampled segment; sample times must be strictly increasing and cover
    /// `[start, end]`.
    pub fn sampled(start: f64, end: f64, times: Vec<f64>, values: Vec<CMat>) -> Result<Segment> {
        Interval::new(start, end)
            .map_err(|e| Error::InvalidSegment(e.to_string()))?;
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidSegment(
                "sampled segment needs at least two samples with matching values".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSegment(
                "sample times must be strictly increasing".into(),
            ));
        }
        if times[0] > start || *times.last().unwrap() < end {
            return Err(Error::InvalidSegment(format!(
                "samples [{}, {}] do not cover [{start}, {end}]",
                times[0],
                times.last().unwrap()
            )));
        }
        let (rows, cols) = values[0].shape();
        if values.iter().any(|v| v.shape() != (rows, cols)) {
            return Err(Error::ShapeMismatch("sample shapes differ".into()));
        }
        Ok(Segment {
            start,
            end,
            rows,
            cols,
            data: SegmentData::Sampled { times, values },
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &SegmentData {
        &self.data
    }

    /// Entry source strings for closed-form segments.
    pub fn sources(&self) -> Option<&[String]> {
        match &self.data {
            SegmentData::Expressions { sources, .. } => Some(sources),
            SegmentData::Sampled { .. } => None,
        }
    }

    /// Rejects rational entries whose denominator vanishes on `[start, end]`.
    fn check_poles(&self) -> Result<()> {
        let SegmentData::Expressions { entries, .. } = &self.data else {
            return Ok(());
        };
        let h = (self.end - self.start) / (POLE_SCAN_NODES - 1) as f64;
        for e in entries {
            for den in e.denominators() {
                let vals: Vec<C64> = (0..POLE_SCAN_NODES)
                    .map(|k| den.eval(self.start + k as f64 * h))
                    .collect();
                let scale = vals.iter().map(|z| z.norm()).fold(0.0, f64::max);
                for (k, w) in vals.windows(2).enumerate() {
                    let tiny = 1e-12 * scale.max(f64::MIN_POSITIVE);
                    let hit = w[0].norm() <= tiny
                        || (w[0].re * w[1].re < 0.0
                            && (w[0].im * w[1].im <= 0.0
                                || w[0].im.abs().max(w[1].im.abs()) <= tiny));
                    if hit || (k + 2 == vals.len() && w[1].norm() <= tiny) {
                        return Err(Error::InvalidSegment(format!(
                            "denominator `{den}` vanishes in [{}, {}] near t = {}",
                            self.start,
                            self.end,
                            self.start + k as f64 * h
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Value of the smooth extension on the closed segment.
    pub fn eval(&self, t: f64) -> CMat {
        match &self.data {
            SegmentData::Expressions { entries, .. } => {
                CMat::from_fn(self.rows, self.cols, |i, j| entries[i * self.cols + j].eval(t))
            }
            SegmentData::Sampled { times, values } => interpolate(times, values, t),
        }
    }

    pub fn derivative(&self, t: f64) -> CMat {
        match &self.data {
            SegmentData::Expressions { derivatives, .. } => CMat::from_fn(self.rows, self.cols, |i, j| {
                derivatives[i * self.cols + j].eval(t)
            }),
            SegmentData::Sampled { times, values } => {
                let h = 1e-6 * (self.end - self.start);
                let lo = (t - h).max(self.start);
                let hi = (t + h).min(self.end);
                (interpolate(times, values, hi) - interpolate(times, values, lo))
                    / C64::new(hi - lo, 0.0)
            }
        }
    }
}

fn interpolate(times: &[f64], values: &[CMat], t: f64) -> CMat {
    let last = times.len() - 1;
    if t <= times[0] {
        return values[0].clone();
    }
    if t >= times[last] {
        return values[last].clone();
    }
    let k = times.partition_point(|&s| s <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    &values[k] * C64::new(1.0 - w, 0.0) + &values[k + 1] * C64::new(w, 0.0)
}

/// Matrix function given by half-open segments tiling its domain, with
/// optional point-value overrides at the interior segment boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseMatrixFunction {
    rows: usize,
    cols: usize,
    segments: Vec<Segment>,
    overrides: Vec<(f64, CMat)>,
    breakpoints: Vec<f64>,
}

impl PiecewiseMatrixFunction {
    pub fn new(segments: Vec<Segment>, mut overrides: Vec<(f64, CMat)>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidSegment("no segments".into()))?;
        let (rows, cols) = first.shape();
        for s in &segments {
            if s.shape() != (rows, cols) {
                return Err(Error::ShapeMismatch(format!(
                    "segment [{}, {}) is {:?}, expected {:?}",
                    s.start,
                    s.end,
                    s.shape(),
                    (rows, cols)
                )));
            }
        }
        for w in segments.windows(2) {
            if w[0].end != w[1].start {
                return Err(Error::InvalidSegment(format!(
                    "segments [{}, {}) and [{}, {}) do not tile the interval",
                    w[0].start, w[0].end, w[1].start, w[1].end
                )));
            }
        }
        let breakpoints: Vec<f64> = segments.iter().skip(1).map(|s| s.start).collect();
        overrides.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t, m) in &overrides {
            if !breakpoints.contains(t) {
                return Err(Error::InvalidSegment(format!(
                    "point override at t = {t} is not an interior breakpoint"
                )));
            }
            if m.shape() != (rows, cols) {
                return Err(Error::ShapeMismatch(format!("override at t = {t}")));
            }
        }
        if overrides.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidSegment("duplicate point override".into()));
        }
        Ok(PiecewiseMatrixFunction {
            rows,
            cols,
            segments,
            overrides,
            breakpoints,
        })
    }

    pub fn constant(value: &CMat, domain: Interval) -> Self {
        let seg = Segment::constant(domain.start, domain.end, value)
            .expect("constant segment is valid");
        Self::new(vec![seg], Vec::new()).expect("single segment tiles")
    }

    /// Single closed-form segment.
    pub fn expressions(domain: Interval, rows: usize, cols: usize, sources: &[&str]) -> Result<Self> {
        let seg = Segment::expressions(domain.start, domain.end, rows, cols, sources)?;
        Self::new(vec![seg], Vec::new())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn overrides(&self) -> &[(f64, CMat)] {
        &self.overrides
    }

    /// Same function with every point override replaced by `value`.
    pub fn with_override(&self, t: f64, value: CMat) -> Result<Self> {
        let mut o: Vec<(f64, CMat)> = self.overrides.iter().filter(|(s, _)| *s != t).cloned().collect();
        o.push((t, value));
        Self::new(self.segments.clone(), o)
    }

    /// Restriction to a subinterval of the domain. Breakpoints that become
    /// endpoints lose their point overrides.
    pub fn restrict(&self, to: Interval) -> Result<Self> {
        let dom = self.domain();
        if !dom.contains_interval(&to) {
            return Err(Error::OutOfDomain {
                t: if dom.contains(to.start) { to.end } else { to.start },
                start: dom.start,
                end: dom.end,
            });
        }
        let segments: Vec<Segment> = self
            .segments
            .iter()
            .filter(|s| s.end > to.start && s.start < to.end)
            .map(|s| {
                let mut c = s.clone();
                c.start = c.start.max(to.start);
                c.end = c.end.min(to.end);
                c
            })
            .collect();
        let overrides = self
            .overrides
            .iter()
            .filter(|(t, _)| to.is_interior(*t))
            .cloned()
            .collect();
        Self::new(segments, overrides)
    }

    pub fn without_overrides(&self) -> Self {
        Self::new(self.segments.clone(), Vec::new()).expect("segments already validated")
    }

    /// Segment with `start ≤ t < end` (the last one also owns the right end).
    fn owner_right(&self, t: f64) -> &Segment {
        let k = self.segments.partition_point(|s| s.end <= t);
        &self.segments[k.min(self.segments.len() - 1)]
    }

    /// Segment with `start < t ≤ end` (the first one also owns the left end).
    fn owner_left(&self, t: f64) -> &Segment {
        let k = self.segments.partition_point(|s| s.end < t);
        &self.segments[k.min(self.segments.len() - 1)]
    }

    fn override_at(&self, t: f64) -> Option<&CMat> {
        self.overrides.iter().find(|(s, _)| *s == t).map(|(_, m)| m)
    }
}

impl MatrixFunction for PiecewiseMatrixFunction {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn domain(&self) -> Interval {
        Interval {
            start: self.segments[0].start,
            end: self.segments.last().unwrap().end,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }

    fn is_breakpoint(&self, t: f64) -> bool {
        matches_point(&self.breakpoints, t)
    }

    fn eval(&self, t: f64) -> Result<CMat> {
        self.domain().check(t)?;
        if let Some(m) = self.override_at(t) {
            return Ok(m.clone());
        }
        Ok(self.owner_right(t).eval(t))
    }

    fn left_limit(&self, t: f64) -> Result<CMat> {
        self.domain().check(t)?;
        Ok(self.owner_left(t).eval(t))
    }

    fn right_limit(&self, t: f64) -> Result<CMat> {
        self.domain().check(t)?;
        Ok(self.owner_right(t).eval(t))
    }

    fn left_derivative(&self, t: f64) -> Result<CMat> {
        self.domain().check(t)?;
        Ok(self.owner_left(t).derivative(t))
    }

    fn right_derivative(&self, t: f64) -> Result<CMat> {
        self.domain().check(t)?;
        Ok(self.owner_right(t).derivative(t))
    }
}
