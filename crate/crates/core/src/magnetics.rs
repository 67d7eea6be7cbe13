//! Magnetic force on the tip magnet.
//!
//! The analytic backend treats the magnet as a point dipole facing two
//! permeable half-spaces. Each sheet contributes the force of an image dipole
//! with strength `(μ_r − 1)/(μ_r + 1)`, which falls off as `1/d⁴`.
//! [`ForceTable`] caches either backend on a `(x, T)` grid for the engine.

use alloc::format;
use alloc::vec::Vec;

use crate::materials::ThermoMagneticMaterial;
use crate::moment::{MeshDensity, MomentSheetModel};
use crate::{Error, Result, MU0};

/// Anything that can report the net magnetic force on the tip.
///
/// The engine may probe slightly beyond the contact limit while it localizes
/// an impact inside a step, so implementations should accept `|x|` a little
/// larger than `contact_limit`.
pub trait ForceModel {
    /// Net force on the tip in N, positive toward the `+x` sheet.
    fn force(&self, x: f64, temp: f64) -> Result<f64>;
}

impl<F: ForceModel + ?Sized> ForceModel for &F {
    fn force(&self, x: f64, temp: f64) -> Result<f64> {
        (**self).force(x, temp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetSpec {
    /// Remanent flux density, T.
    pub remanence: f64,
    /// Magnet volume, m³.
    pub volume: f64,
}

impl MagnetSpec {
    pub fn new(remanence: f64, volume: f64) -> Result<Self> {
        let m = MagnetSpec { remanence, volume };
        m.validate()?;
        Ok(m)
    }

    /// Magnet with the given remanence sized to carry `moment` (A·m²).
    pub fn with_moment(remanence: f64, moment: f64) -> Result<Self> {
        if !(remanence > 0.0) {
            return Err(Error::invalid("remanence must be > 0 to size a magnet"));
        }
        Self::new(remanence, moment * MU0 / remanence)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.remanence >= 0.0) || !self.remanence.is_finite() {
            return Err(Error::invalid("magnet remanence must be finite and >= 0"));
        }
        if !(self.volume > 0.0) || !self.volume.is_finite() {
            return Err(Error::invalid("magnet volume must be finite and > 0"));
        }
        Ok(())
    }

    pub fn dipole_moment(&self) -> f64 {
        self.remanence * self.volume / MU0
    }
}

impl Default for MagnetSpec {
    fn default() -> Self {
        // 0.2 A·m² NdFeB magnet.
        MagnetSpec {
            remanence: 1.2,
            volume: 0.2 * MU0 / 1.2,
        }
    }
}

/// Equivalent dipole moment `B_r·V/μ₀` in A·m².
pub fn dipole_moment(remanence: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0) {
        return Err(Error::invalid("magnet volume must be > 0"));
    }
    if !(remanence >= 0.0) {
        return Err(Error::invalid("remanence must be >= 0"));
    }
    Ok(remanence * volume / MU0)
}

/// Placement of the two sheets around the beam's rest line.
///
/// The displacement axis `x` is normal to the sheets. The `+x` ("top") sheet
/// occupies `x ∈ [g, g + thickness]`, the bottom one mirrors it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetPairGeometry {
    /// Distance from the centre line to each sheet surface, m.
    pub half_gap: f64,
    /// Mechanical stop `x_c`, m.
    pub contact_limit: f64,
    pub sheet_width: f64,
    pub sheet_height: f64,
    pub sheet_thickness: f64,
}

impl Default for SheetPairGeometry {
    fn default() -> Self {
        SheetPairGeometry {
            half_gap: 0.010,
            contact_limit: 0.0085,
            sheet_width: 0.020,
            sheet_height: 0.020,
            sheet_thickness: 0.001,
        }
    }
}

impl SheetPairGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.contact_limit > 0.0 && self.contact_limit < self.half_gap) {
            return Err(Error::invalid(format!(
                "contact_limit ({}) must satisfy 0 < contact_limit < half_gap ({})",
                self.contact_limit, self.half_gap
            )));
        }
        if !(self.sheet_width > 0.0 && self.sheet_height > 0.0 && self.sheet_thickness > 0.0) {
            return Err(Error::invalid("sheet dimensions must be > 0"));
        }
        Ok(())
    }

    /// Smallest magnet–sheet distance `g − x_c`.
    pub fn min_distance(&self) -> f64 {
        self.half_gap - self.contact_limit
    }
}

/// Image coefficient `(μ_r − 1)/(μ_r + 1)` of a permeable half-space.
pub fn image_coefficient(mu_r: f64) -> f64 {
    (mu_r - 1.0) / (mu_r + 1.0)
}

/// `3μ₀m²/(2π·16)`: the prefactor of `β/d⁴` in the single-sheet force.
fn image_prefactor(moment: f64) -> f64 {
    3.0 * MU0 * moment * moment / (2.0 * core::f64::consts::PI * 16.0)
}

/// Attraction (N, ≥ 0) between a dipole normal to a permeable half-space and
/// that half-space, at distance `d` from its surface.
pub fn image_force_single_sheet(moment: f64, d: f64, mu_r: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Singularity(format!(
            "magnet-sheet distance {d} m must be > 0"
        )));
    }
    if !(mu_r >= 1.0) {
        return Err(Error::invalid("mu_r must be >= 1"));
    }
    let d2 = d * d;
    Ok(image_prefactor(moment) * image_coefficient(mu_r) / (d2 * d2))
}

/// Net analytic force at displacement `x`: top-sheet attraction minus
/// bottom-sheet attraction.
pub fn net_analytic_force(
    x: f64,
    temp: f64,
    geom: &SheetPairGeometry,
    magnet: &MagnetSpec,
    mat: &ThermoMagneticMaterial,
) -> Result<f64> {
    if !(x.abs() <= geom.contact_limit) {
        return Err(Error::domain(format!(
            "|x| = {} exceeds contact limit {}",
            x.abs(),
            geom.contact_limit
        )));
    }
    AnalyticForceModel::new(*geom, *magnet, *mat)?.force(x, temp)
}

/// Image-dipole force model, evaluated without the cancellation of the
/// two-sheet difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticForceModel {
    pub geom: SheetPairGeometry,
    pub magnet: MagnetSpec,
    pub material: ThermoMagneticMaterial,
    prefactor: f64,
}

impl AnalyticForceModel {
    pub fn new(
        geom: SheetPairGeometry,
        magnet: MagnetSpec,
        material: ThermoMagneticMaterial,
    ) -> Result<Self> {
        geom.validate()?;
        magnet.validate()?;
        material.validate()?;
        Ok(AnalyticForceModel {
            geom,
            magnet,
            material,
            prefactor: image_prefactor(magnet.dipole_moment()),
        })
    }
}

impl ForceModel for AnalyticForceModel {
    fn force(&self, x: f64, temp: f64) -> Result<f64> {
        let g = self.geom.half_gap;
        if !(x.abs() < g) {
            return Err(Error::Singularity(format!(
                "displacement {x} m reaches a sheet at {g} m"
            )));
        }
        let mu = self.material.relative_permeability(temp)?;
        if mu == 1.0 {
            return Ok(0.0);
        }
        // C/(g−x)⁴ − C/(g+x)⁴ = C·8gx(g² + x²)/(g² − x²)⁴
        let g2 = g * g;
        let x2 = x * x;
        let den = (g2 - x2) * (g2 - x2);
        Ok(self.prefactor * image_coefficient(mu) * 8.0 * g * x * (g2 + x2) / (den * den))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceSource {
    Analytic,
    Moment,
}

impl ForceSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ForceSource::Analytic => "analytic",
            ForceSource::Moment => "moment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceBackend {
    Analytic,
    Moment(MeshDensity),
}

impl ForceBackend {
    pub fn source(&self) -> ForceSource {
        match self {
            ForceBackend::Analytic => ForceSource::Analytic,
            ForceBackend::Moment(_) => ForceSource::Moment,
        }
    }
}

/// Force sampled on a rectilinear `(x, T)` grid.
///
/// Values are stored row-major with one row per temperature node.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTable {
    x_grid: Vec<f64>,
    t_grid: Vec<f64>,
    values: Vec<f64>,
    source: ForceSource,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::invalid(format!("{name} needs at least 2 nodes")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{name} contains non-finite values")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl ForceTable {
    /// `values[j * x_grid.len() + i]` is the force at `(x_grid[i], t_grid[j])`.
    pub fn new(
        x_grid: Vec<f64>,
        t_grid: Vec<f64>,
        values: Vec<f64>,
        source: ForceSource,
    ) -> Result<Self> {
        check_grid("x grid", &x_grid)?;
        check_grid("temperature grid", &t_grid)?;
        if values.len() != x_grid.len() * t_grid.len() {
            return Err(Error::invalid(format!(
                "force table has {} values, expected {}x{}",
                values.len(),
                t_grid.len(),
                x_grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("force table contains non-finite values"));
        }
        Ok(ForceTable {
            x_grid,
            t_grid,
            values,
            source,
        })
    }

    pub fn x_grid(&self) -> &[f64] {
        &self.x_grid
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> ForceSource {
        self.source
    }

    /// Node value at `(x_grid[i], t_grid[j])`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.x_grid.len() + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.x_grid.len();
        &self.values[j * n..(j + 1) * n]
    }

    /// `max_{x,T} |F(x,T) + F(−x,T)| / max|F|` over mirrored node pairs, or
    /// `None` when the x grid is not symmetric about zero.
    pub fn antisymmetry_defect(&self) -> Option<f64> {
        let n = self.x_grid.len();
        let symmetric = (0..n).all(|i| self.x_grid[i] == -self.x_grid[n - 1 - i]);
        if !symmetric {
            return None;
        }
        let max = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if max == 0.0 {
            return Some(0.0);
        }
        let mut worst = 0.0f64;
        for j in 0..self.t_grid.len() {
            for i in 0..n {
                worst = worst.max((self.value(i, j) + self.value(n - 1 - i, j)).abs());
            }
        }
        Some(worst / max)
    }

    /// Bilinear interpolation. Queries outside the grid hull are rejected.
    pub fn interp(&self, x: f64, temp: f64) -> Result<f64> {
        let (i, wx) = locate(&self.x_grid, x)
            .ok_or_else(|| Error::domain(format!("x = {x} m outside force table")))?;
        let (j, wt) = locate(&self.t_grid, temp)
            .ok_or_else(|| Error::domain(format!("T = {temp} °C outside force table")))?;
        let lerp = |a: f64, b: f64, w: f64| (1.0 - w) * a + w * b;
        let lo = lerp(self.value(i, j), self.value(i + 1, j), wx);
        let hi = lerp(self.value(i, j + 1), self.value(i + 1, j + 1), wx);
        Ok(lerp(lo, hi, wt))
    }
}

/// Cell index and fractional offset of `v` in `grid`, `None` outside the hull.
fn locate(grid: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = grid.len();
    if !(v >= grid[0] && v <= grid[n - 1]) {
        return None;
    }
    // first node strictly greater than v, so a node value lands at w = 0
    let upper = grid.partition_point(|&g| g <= v);
    let i = upper.saturating_sub(1).min(n - 2);
    let w = (v - grid[i]) / (grid[i + 1] - grid[i]);
    Some((i, w))
}

/// Free-function form of [`ForceTable::interp`].
pub fn interp_force(table: &ForceTable, x: f64, temp: f64) -> Result<f64> {
    table.interp(x, temp)
}

impl ForceModel for ForceTable {
    /// Clamps `x` into the tabulated range. The engine only leaves that range
    /// within a contact step, where the stop force is what matters.
    fn force(&self, x: f64, temp: f64) -> Result<f64> {
        let xs = x.clamp(self.x_grid[0], self.x_grid[self.x_grid.len() - 1]);
        self.interp(xs, temp)
    }
}

/// Row-by-row table construction. Each temperature row is independent, which
/// lets callers evaluate rows in parallel and assemble them with
/// [`ForceTableBuilder::finish`].
pub struct ForceTableBuilder {
    x_grid: Vec<f64>,
    t_grid: Vec<f64>,
    kind: BuilderKind,
}

enum BuilderKind {
    Analytic(AnalyticForceModel),
    Moment(MomentSheetModel),
}

impl ForceTableBuilder {
    pub fn new(
        backend: &ForceBackend,
        x_grid: Vec<f64>,
        t_grid: Vec<f64>,
        geom: &SheetPairGeometry,
        magnet: &MagnetSpec,
        mat: &ThermoMagneticMaterial,
    ) -> Result<Self> {
        check_grid("x grid", &x_grid)?;
        check_grid("temperature grid", &t_grid)?;
        geom.validate()?;
        let xc = geom.contact_limit;
        if x_grid[0] < -xc || x_grid[x_grid.len() - 1] > xc {
            return Err(Error::invalid(format!(
                "x grid [{}, {}] must lie within the contact limits ±{xc}",
                x_grid[0],
                x_grid[x_grid.len() - 1]
            )));
        }
        let kind = match backend {
            ForceBackend::Analytic => {
                BuilderKind::Analytic(AnalyticForceModel::new(*geom, *magnet, *mat)?)
            }
            ForceBackend::Moment(density) => {
                BuilderKind::Moment(MomentSheetModel::new(*geom, *magnet, *mat, *density)?)
            }
        };
        Ok(ForceTableBuilder {
            x_grid,
            t_grid,
            kind,
        })
    }

    pub fn rows(&self) -> usize {
        self.t_grid.len()
    }

    /// Forces along the x grid at temperature node `j`.
    pub fn row(&self, j: usize) -> Result<Vec<f64>> {
        let temp = self.t_grid[j];
        let named = |i: usize, e: Error| match e {
            Error::NumericalFailure {
                message,
                condition_estimate,
            } => Error::NumericalFailure {
                message: format!(
                    "force table node (x = {}, T = {temp}): {message}",
                    self.x_grid[i]
                ),
                condition_estimate,
            },
            other => other,
        };
        match &self.kind {
            BuilderKind::Analytic(model) => self
                .x_grid
                .iter()
                .enumerate()
                .map(|(i, &x)| model.force(x, temp).map_err(|e| named(i, e)))
                .collect(),
            // the moment solver names the failing x node itself
            BuilderKind::Moment(model) => model.force_row(temp, &self.x_grid),
        }
    }

    pub fn finish(self, rows: Vec<Vec<f64>>) -> Result<ForceTable> {
        let source = match self.kind {
            BuilderKind::Analytic(_) => ForceSource::Analytic,
            BuilderKind::Moment(_) => ForceSource::Moment,
        };
        if rows.len() != self.t_grid.len() {
            return Err(Error::invalid("row count does not match temperature grid"));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        ForceTable::new(self.x_grid, self.t_grid, values, source)
    }
}

/// Sequential table construction.
pub fn build_force_table(
    backend: &ForceBackend,
    x_grid: Vec<f64>,
    t_grid: Vec<f64>,
    geom: &SheetPairGeometry,
    magnet: &MagnetSpec,
    mat: &ThermoMagneticMaterial,
) -> Result<ForceTable> {
    let builder = ForceTableBuilder::new(backend, x_grid, t_grid, geom, magnet, mat)?;
    let rows = (0..builder.rows())
        .map(|j| builder.row(j))
        .collect::<Result<Vec<_>>>()?;
    builder.finish(rows)
}

/// `n` evenly spaced points over `[lo, hi]` with exact endpoints and exact
/// mirror symmetry when `lo = −hi`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![lo];
    }
    let last = (n - 1) as f64;
    let mut v: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 / last))
        .collect();
    v[n - 1] = hi;
    if lo == -hi {
        for i in 0..n / 2 {
            v[n - 1 - i] = -v[i];
        }
        if n % 2 == 1 {
            v[n / 2] = 0.0;
        }
    }
    v
}
