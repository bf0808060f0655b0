use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use super::hmatrix::{from_phi_g, to_phi_g, HMatrix};
use crate::error::{Error, Result};
use crate::quad;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(f64) -> HMatrix + Send + Sync>;

/// Closed-form tail of the L²-aligned, trace-normed system:
/// `W(s) = ∫_s^∞ sin²φ`, with its exact limsup/liminf of `s W(s)`.
#[derive(Clone)]
pub struct AnalyticTail {
    w: ScalarFn,
    sup_from: ScalarFn,
    pub a_exact: f64,
    pub b_exact: f64,
}

impl AnalyticTail {
    /// `sup_from(a)` must return `sup_{s >= a} s W(s)` exactly (or an upper
    /// bound); it drives the non-oscillation certificate.
    pub fn new(
        w: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup_from: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a_exact: f64,
        b_exact: f64,
    ) -> Self {
        assert!(b_exact <= a_exact, "liminf must not exceed limsup");
        AnalyticTail {
            w: Arc::new(w),
            sup_from: Arc::new(sup_from),
            a_exact,
            b_exact,
        }
    }

    pub fn w(&self, s: f64) -> f64 {
        (self.w)(s)
    }

    pub fn sup_xw_from(&self, a: f64) -> f64 {
        (self.sup_from)(a)
    }

    pub fn zero() -> Self {
        AnalyticTail::new(|_| 0.0, |_| 0.0, 0.0, 0.0)
    }
}

impl fmt::Debug for AnalyticTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticTail")
            .field("a_exact", &self.a_exact)
            .field("b_exact", &self.b_exact)
            .finish()
    }
}

/// Cumulative arclength `s(x) = ∫_0^x tr H` on a table of cells, with
/// Newton inversion inside a cell.
pub struct ArclengthTable {
    xs: Vec<f64>,
    ss: Vec<f64>,
    trace: ScalarFn,
    /// Constant trace used past the last node, if the table extends forever.
    beyond: Option<f64>,
}

impl ArclengthTable {
    pub fn from_nodes(trace: ScalarFn, nodes: Vec<f64>, beyond: Option<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes[0] != 0.0 {
            return Err(Error::InvalidParam(
                "arclength nodes must start at 0".into(),
            ));
        }
        let mut ss = Vec::with_capacity(nodes.len());
        ss.push(0.0);
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParam("arclength nodes must increase".into()));
            }
            let (piece, _) = quad::integrate(|x| trace(x), w[0], w[1], 1e-14, 1e-13);
            if !(piece > 0.0) || !piece.is_finite() {
                return Err(Error::Precondition(format!(
                    "trace vanishes or is not integrable on [{}, {}]",
                    w[0], w[1]
                )));
            }
            ss.push(ss.last().unwrap() + piece);
        }
        Ok(ArclengthTable {
            xs: nodes,
            ss,
            trace,
            beyond,
        })
    }

    /// Uniform cells of width `cell` on `[0, x_cap]`.
    pub fn uniform(trace: ScalarFn, x_cap: f64, cell: f64) -> Result<Self> {
        let n = (x_cap / cell).ceil().max(1.0) as usize;
        let nodes = (0..=n).map(|i| x_cap * i as f64 / n as f64).collect();
        ArclengthTable::from_nodes(trace, nodes, None)
    }

    pub fn x_end(&self) -> f64 {
        if self.beyond.is_some() {
            f64::INFINITY
        } else {
            *self.xs.last().unwrap()
        }
    }

    pub fn s_end(&self) -> f64 {
        if self.beyond.is_some() {
            f64::INFINITY
        } else {
            *self.ss.last().unwrap()
        }
    }

    fn cell_of(nodes: &[f64], v: f64) -> usize {
        match nodes.binary_search_by(|p| p.partial_cmp(&v).unwrap()) {
            Ok(i) => i.min(nodes.len() - 1),
            Err(i) => i.saturating_sub(1),
        }
    }

    pub fn s_of_x(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x >= self.xs[last] {
            let s_last = self.ss[last];
            return match self.beyond {
                Some(tr) => s_last + tr * (x - self.xs[last]),
                None => s_last,
            };
        }
        let i = Self::cell_of(&self.xs, x);
        let (piece, _) = quad::integrate(|y| (self.trace)(y), self.xs[i], x, 1e-15, 1e-14);
        self.ss[i] + piece
    }

    pub fn x_of_s(&self, s: f64) -> f64 {
        let last = self.xs.len() - 1;
        if s >= self.ss[last] {
            return match self.beyond {
                Some(tr) => self.xs[last] + (s - self.ss[last]) / tr,
                None => self.xs[last],
            };
        }
        let i = Self::cell_of(&self.ss, s);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (s0, s1) = (self.ss[i], self.ss[i + 1]);
        let (mut lo, mut hi) = (x0, x1);
        let mut x = x0 + (x1 - x0) * (s - s0) / (s1 - s0);
        for _ in 0..60 {
            let (piece, _) = quad::integrate(|y| (self.trace)(y), x0, x, 1e-15, 1e-14);
            let resid = s0 + piece - s;
            if resid > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if resid.abs() <= 1e-14 * s.abs().max(1.0) {
                return x;
            }
            let next = x - resid / (self.trace)(x);
            x = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * hi.abs().max(1.0) {
                break;
            }
        }
        x
    }
}

/// How `tr H(x)` and the arclength `s(x) = ∫_0^x tr H` are known.
#[derive(Clone)]
pub enum TraceModel {
    /// `tr H ≡ 1`.
    Unit,
    /// Closed forms for the trace, the arclength and its inverse.
    Analytic {
        trace: ScalarFn,
        arclength: ScalarFn,
        inverse: ScalarFn,
    },
    Tabulated(Arc<ArclengthTable>),
}

impl fmt::Debug for TraceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceModel::Unit => write!(f, "Unit"),
            TraceModel::Analytic { .. } => write!(f, "Analytic"),
            TraceModel::Tabulated(t) => write!(f, "Tabulated(x_end = {})", t.x_end()),
        }
    }
}

/// Scale used by the long-horizon angle integrator (see `prufer`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AngleScale {
    /// Plain Prüfer angle.
    Unit,
    /// Angle of `(u1, (1 + s) u2)`, natural when `sin²φ` decays like `s^-2`.
    Log,
}

/// Piecewise-constant, right-continuous sample table.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    xs: Vec<f64>,
    cells: Vec<HMatrix>,
    traces: Vec<f64>,
}

impl GridTable {
    /// Rows of `(x, phi, g, trace)`; `x` must start at 0 and increase. The
    /// last row extends to infinity.
    pub fn new(rows: &[(f64, f64, f64, f64)]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParam("grid has no rows".into()));
        }
        if rows[0].0 != 0.0 {
            return Err(Error::InvalidParam("grid must start at x = 0".into()));
        }
        let mut xs = Vec::with_capacity(rows.len());
        let mut cells = Vec::with_capacity(rows.len());
        let mut traces = Vec::with_capacity(rows.len());
        for (i, &(x, phi, g, tr)) in rows.iter().enumerate() {
            if i > 0 && !(x > xs[i - 1]) {
                return Err(Error::InvalidParam(format!(
                    "grid x must increase (row {i})"
                )));
            }
            cells.push(from_phi_g(phi, g, 1.0)?);
            if !(tr > 0.0 && tr.is_finite()) {
                return Err(Error::Range {
                    name: "trace",
                    value: tr,
                    expected: "trace > 0",
                });
            }
            xs.push(x);
            traces.push(tr);
        }
        Ok(GridTable { xs, cells, traces })
    }

    /// Parses CSV with a header `x,phi,g` or `x,phi,g,trace`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty grid file".into()))?;
        let cols: Vec<_> = header.split(',').map(|c| c.trim()).collect();
        let with_trace = match cols.as_slice() {
            ["x", "phi", "g"] => false,
            ["x", "phi", "g", "trace"] => true,
            _ => return Err(Error::Parse(format!("unexpected grid header `{header}`"))),
        };
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)))?;
            let want = if with_trace { 4 } else { 3 };
            if vals.len() != want {
                return Err(Error::Parse(format!(
                    "line {}: expected {want} columns",
                    n + 2
                )));
            }
            rows.push((
                vals[0],
                vals[1],
                vals[2],
                if with_trace { vals[3] } else { 1.0 },
            ));
        }
        GridTable::new(&rows)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn starts(&self) -> &[f64] {
        &self.xs
    }

    pub fn cell_index(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    pub fn cell(&self, i: usize) -> (HMatrix, f64) {
        (self.cells[i], self.traces[i])
    }

    pub fn has_unit_trace(&self) -> bool {
        self.traces.iter().all(|&t| t == 1.0)
    }
}

/// A half-line canonical system `H(x) >= 0` in the `(phi, g)` form, scaled by
/// an optional trace.
///
/// Internally the system is a trace-one "base" matrix function plus a frame
/// rotation: `H(x) = tr(x) R(frame)^* B(x) R(frame)`. Rotations only touch the
/// frame angle, so composing them never degrades tiny entries of `B`.
#[derive(Clone)]
pub struct CoefficientField {
    label: String,
    base: MatrixFn,
    frame: f64,
    trace: TraceModel,
    l2_angle: Option<f64>,
    tail: Option<AnalyticTail>,
    support_end: Option<f64>,
    base_diagonal: bool,
    scale: AngleScale,
    grid: Option<Arc<GridTable>>,
    notes: Vec<String>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("label", &self.label)
            .field("frame", &self.frame)
            .field("trace", &self.trace)
            .field("l2_angle", &self.l2_angle)
            .field("tail", &self.tail)
            .field("scale", &self.scale)
            .finish()
    }
}

fn is_quarter_multiple(a: f64) -> bool {
    let q = (a / FRAC_PI_2).round();
    (a - q * FRAC_PI_2).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0)
}

impl CoefficientField {
    /// `base` must return trace-one positive semidefinite matrices.
    pub fn from_matrix_fn(
        label: impl Into<String>,
        base: impl Fn(f64) -> HMatrix + Send + Sync + 'static,
    ) -> Self {
        CoefficientField {
            label: label.into(),
            base: Arc::new(base),
            frame: 0.0,
            trace: TraceModel::Unit,
            l2_angle: None,
            tail: None,
            support_end: None,
            base_diagonal: false,
            scale: AngleScale::Unit,
            grid: None,
            notes: Vec::new(),
        }
    }

    /// Trace-normed field from `phi(x)` and `g(x)`; values of `g` outside
    /// `[0, 1]` are clamped.
    pub fn from_phi_g_fns(
        label: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CoefficientField::from_matrix_fn(label, move |x| {
            from_phi_g(phi(x), g(x).clamp(0.0, 1.0), 1.0).unwrap_or(HMatrix::diag(0.0, 1.0))
        })
    }

    pub fn with_trace(mut self, trace: TraceModel) -> Self {
        self.trace = trace;
        self
    }

    /// Declares `v = (cos a, sin a)` (in the current frame) as a direction
    /// with `∫ v^* H v < ∞`.
    pub fn with_l2_direction(mut self, angle: f64) -> Self {
        self.l2_angle = Some(angle + self.frame);
        self
    }

    pub fn with_tail(mut self, tail: AnalyticTail) -> Self {
        self.tail = Some(tail);
        self
    }

    /// `sin φ ≡ 0` (in the L² frame) for `s >= end`.
    pub fn with_support_end(mut self, end: f64) -> Self {
        self.support_end = Some(end);
        self
    }

    pub fn with_diagonal_base(mut self, diagonal: bool) -> Self {
        self.base_diagonal = diagonal;
        self
    }

    pub fn with_scale(mut self, scale: AngleScale) -> Self {
        self.scale = scale;
        self
    }

    pub(crate) fn with_grid(mut self, grid: Arc<GridTable>) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn frame(&self) -> f64 {
        self.frame
    }

    pub fn trace_model(&self) -> &TraceModel {
        &self.trace
    }

    pub fn tail(&self) -> Option<&AnalyticTail> {
        self.tail.as_ref()
    }

    pub fn support_end(&self) -> Option<f64> {
        self.support_end
    }

    pub fn scale(&self) -> AngleScale {
        self.scale
    }

    pub fn grid(&self) -> Option<&GridTable> {
        self.grid.as_deref()
    }

    pub fn trace_normed(&self) -> bool {
        matches!(self.trace, TraceModel::Unit)
    }

    pub fn l2_direction_ok(&self) -> bool {
        self.l2_angle.is_some()
    }

    /// The declared L² direction as a unit vector in the current frame.
    pub fn l2_direction(&self) -> Option<(f64, f64)> {
        self.l2_angle.map(|a| {
            let (s, c) = (a - self.frame).sin_cos();
            (c, s)
        })
    }

    /// `g ≡ 0` in the current frame.
    pub fn is_diagonal(&self) -> bool {
        self.base_diagonal && is_quarter_multiple(self.frame)
    }

    /// The system seen in its L² frame is diagonal, so the sharper
    /// diagonal certificate applies.
    pub(crate) fn analysis_is_diagonal(&self) -> bool {
        self.base_diagonal && is_quarter_multiple(self.analysis_angle())
    }

    /// Provenance string: label plus frame and alignment metadata.
    pub fn fingerprint(&self) -> String {
        format!(
            "{}|frame={:.17e}|l2={:?}|trace={}",
            self.label,
            self.frame,
            self.l2_angle,
            if self.trace_normed() {
                "unit"
            } else {
                "general"
            }
        )
    }

    pub fn domain_end(&self) -> f64 {
        match &self.trace {
            TraceModel::Tabulated(t) => t.x_end(),
            _ => f64::INFINITY,
        }
    }

    pub fn s_domain_end(&self) -> f64 {
        match &self.trace {
            TraceModel::Tabulated(t) => t.s_end(),
            _ => f64::INFINITY,
        }
    }

    fn check_x(&self, x: f64) -> Result<()> {
        let end = self.domain_end();
        if !(x >= 0.0) || x > end {
            return Err(Error::Domain { x, end });
        }
        Ok(())
    }

    pub fn trace_at(&self, x: f64) -> f64 {
        match &self.trace {
            TraceModel::Unit => 1.0,
            TraceModel::Analytic { trace, .. } => trace(x),
            TraceModel::Tabulated(t) => (t.trace)(x),
        }
    }

    pub fn s_of_x(&self, x: f64) -> f64 {
        match &self.trace {
            TraceModel::Unit => x,
            TraceModel::Analytic { arclength, .. } => arclength(x),
            TraceModel::Tabulated(t) => t.s_of_x(x),
        }
    }

    pub fn x_of_s(&self, s: f64) -> f64 {
        match &self.trace {
            TraceModel::Unit => s,
            TraceModel::Analytic { inverse, .. } => inverse(s),
            TraceModel::Tabulated(t) => t.x_of_s(s),
        }
    }

    /// Trace-one matrix in the current frame; no domain check.
    pub(crate) fn normalized_unchecked(&self, x: f64) -> HMatrix {
        (self.base)(x).rotated(self.frame)
    }

    /// Trace-one matrix at `x` in the current frame.
    pub fn normalized_at(&self, x: f64) -> Result<HMatrix> {
        self.check_x(x)?;
        Ok(self.normalized_unchecked(x))
    }

    /// The coefficient matrix `H(x)`, including the trace.
    pub fn h_at(&self, x: f64) -> Result<HMatrix> {
        self.check_x(x)?;
        Ok(self.normalized_unchecked(x).scaled(self.trace_at(x)))
    }

    pub fn phi(&self, x: f64) -> Result<f64> {
        Ok(to_phi_g(&self.normalized_at(x)?)?.phi)
    }

    pub fn g(&self, x: f64) -> Result<f64> {
        Ok(to_phi_g(&self.normalized_at(x)?)?.g)
    }

    /// Frame used for oscillation analysis: the L² frame if declared,
    /// otherwise the current frame. Relative to the base.
    pub(crate) fn analysis_angle(&self) -> f64 {
        self.l2_angle.unwrap_or(self.frame)
    }

    /// `θ_current = θ_analysis + offset` for solutions of the angle equation.
    pub(crate) fn analysis_offset(&self) -> f64 {
        self.analysis_angle() - self.frame
    }

    /// Trace-one matrix in the analysis frame at arclength `s`.
    pub(crate) fn analysis_at_s(&self, s: f64) -> HMatrix {
        (self.base)(self.x_of_s(s)).rotated(self.analysis_angle())
    }

    /// `R^* H R` for the rotation by `alpha`; trace and metadata carry over.
    pub fn rotated(&self, alpha: f64) -> CoefficientField {
        let mut out = self.clone();
        out.frame += alpha;
        out.label = format!("{}|rot({alpha})", self.label);
        out
    }

    /// The same system with the off-diagonal entries set to zero.
    pub fn diagonal_part(&self) -> CoefficientField {
        let mut out = self.clone();
        out.label = format!("diag({})", self.label);
        out.base_diagonal = true;
        if is_quarter_multiple(self.frame) {
            let base = self.base.clone();
            out.base = Arc::new(move |x| base(x).diagonal());
            if let Some(l2) = self.l2_angle {
                if !is_quarter_multiple(l2) {
                    out.tail = None;
                    out.support_end = None;
                }
            }
        } else {
            let base = self.base.clone();
            let frame = self.frame;
            out.base = Arc::new(move |x| base(x).rotated(frame).diagonal());
            out.frame = 0.0;
            out.l2_angle = self.l2_angle.map(|a| a - frame);
            if !self
                .l2_angle
                .is_some_and(|a| is_quarter_multiple(a - frame))
            {
                out.tail = None;
                out.support_end = None;
            }
        }
        if let Some(grid) = &self.grid {
            let _ = grid;
        }
        out
    }

    /// Reparametrises by arclength `s = ∫_0^x tr H`, giving a trace-normed
    /// field with the same oscillation behaviour at every `t`.
    pub fn trace_normalize(&self) -> CoefficientField {
        if self.trace_normed() {
            return self.clone();
        }
        let mut out = self.clone();
        let base = self.base.clone();
        let me = self.clone();
        out.base = Arc::new(move |s| base(me.x_of_s(s)));
        out.trace = match &self.trace {
            TraceModel::Tabulated(t) if t.s_end().is_finite() => {
                let end = t.s_end();
                TraceModel::Tabulated(Arc::new(
                    ArclengthTable::from_nodes(Arc::new(|_| 1.0), vec![0.0, end], None)
                        .expect("positive length"),
                ))
            }
            _ => TraceModel::Unit,
        };
        out.grid = None;
        out.label = format!("{}|trace_normalized", self.label);
        out.notes
            .push("reparametrized by arclength s = ∫ tr H dx".into());
        out
    }

    /// Checks the representation invariants at the given sample points.
    pub fn validate(&self, xs: &[f64]) -> Result<()> {
        for &x in xs {
            let b = (self.base)(x);
            if !(b.h11.is_finite() && b.h12.is_finite() && b.h22.is_finite()) {
                return Err(Error::NotPsd(format!("non-finite entries at x = {x}")));
            }
            if (b.trace() - 1.0).abs() > 1e-12 {
                return Err(Error::NotPsd(format!(
                    "base matrix at x = {x} has trace {}",
                    b.trace()
                )));
            }
            let h = self.h_at(x)?;
            let (lo, _) = h.eigenvalues();
            if lo < -1e-12 * h.trace().max(1.0) {
                return Err(Error::NotPsd(format!("eigenvalue {lo} at x = {x}")));
            }
            let pg = to_phi_g(&h)?;
            if !(0.0..=1.0).contains(&pg.g) || !(-FRAC_PI_2..FRAC_PI_2).contains(&pg.phi) {
                return Err(Error::InvalidParam(format!(
                    "(phi, g) out of range at x = {x}"
                )));
            }
        }
        Ok(())
    }

    /// Integrals of `v^* H̃ v` (trace-normed, L² frame) over the dyadic
    /// blocks `[2^k, 2^{k+1}]` up to `s_max`, used to flag an L² declaration
    /// that looks wrong. Returns the block integrals and whether they decay.
    pub fn l2_growth_diagnostic(&self, s_max: f64) -> (Vec<f64>, bool) {
        let mut blocks = Vec::new();
        let mut lo = 1.0;
        let end = s_max.min(self.s_domain_end());
        while lo * 2.0 <= end {
            let (v, _) =
                quad::integrate_log(|s| self.analysis_at_s(s).h11, lo, 2.0 * lo, 1e-300, 1e-9);
            blocks.push(v);
            lo *= 2.0;
        }
        let n = blocks.len();
        let decaying = n < 4
            || blocks[n - 4..]
                .windows(2)
                .all(|w| w[1] <= 0.95 * w[0] || w[1] <= 1e-300);
        (blocks, decaying)
    }
}
