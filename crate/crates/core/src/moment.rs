//! Magnetostatic moment method for the two FeNi sheets.
//!
//! Each sheet is cut into uniformly magnetized rectangular cells. The field
//! at cell `i` is the source dipole's field plus the field of every
//! magnetized cell, so the cell magnetizations solve
//!
//! ```text
//! (I − χ K) M = χ H_applied
//! ```
//!
//! where the 3×3 block `K_ij` maps the magnetization of cell `j` to the field
//! it produces at the centre of cell `i`. Off-diagonal blocks use the exact
//! field of a uniformly magnetized prism (which tends to the point-dipole
//! kernel `V_j (3 r̂r̂ᵀ − I)/(4π r³)` at large separation). Diagonal blocks
//! are `−N_self`, the demagnetizing tensor at the centre of the cell.
//!
//! Once `M` is known, the reaction force on the source dipole is the sum of
//! closed-form dipole–dipole forces from the cell moments `M_j V_j`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::{relative_residual, DenseMatrix, LuFactorization};
use crate::magnetics::{ForceModel, MagnetSpec, SheetPairGeometry};
use crate::materials::ThermoMagneticMaterial;
use crate::vec3::{Mat3, Vec3};
use crate::{Error, Result, MU0};

/// Largest accepted relative residual of a magnetization solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Beyond this many cell half-sizes the prism field is replaced by the
/// dipole kernel; the exact formula loses digits to cancellation out there.
const FAR_FIELD_RATIO: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: Vec3,
    /// Edge lengths along x, y, z.
    pub size: Vec3,
    pub susceptibility: f64,
}

impl Cell {
    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    fn half(&self) -> Vec3 {
        self.size * 0.5
    }

    fn overlaps(&self, other: &Cell) -> bool {
        (0..3).all(|k| {
            let gap = (self.center[k] - other.center[k]).abs();
            let reach = 0.5 * (self.size[k] + other.size[k]);
            // shared faces are fine; tolerate rounding of the lattice
            gap < reach * (1.0 - 1e-9)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellMesh {
    pub cells: Vec<Cell>,
}

/// Cell counts across a sheet: in-plane width (y), in-plane height (z) and
/// through the thickness (x).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshDensity {
    pub width: usize,
    pub height: usize,
    pub thickness: usize,
}

impl MeshDensity {
    pub const fn new(width: usize, height: usize, thickness: usize) -> Self {
        MeshDensity {
            width,
            height,
            thickness,
        }
    }
}

impl Default for MeshDensity {
    fn default() -> Self {
        MeshDensity::new(8, 8, 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SheetSide {
    /// The sheet on the `+x` side.
    Top,
    Bottom,
}

impl CellMesh {
    /// Regular `counts[0]×counts[1]×counts[2]` partition of the box with the
    /// given centre and edge lengths (x, y, z), ordered x-fastest.
    pub fn block(center: Vec3, extent: Vec3, counts: [usize; 3], susceptibility: f64) -> Result<Self> {
        if counts.contains(&0) {
            return Err(Error::invalid("mesh counts must be >= 1"));
        }
        if (0..3).any(|k| !(extent[k] > 0.0)) {
            return Err(Error::invalid("mesh extent must be > 0"));
        }
        let size = Vec3::new(
            extent[0] / counts[0] as f64,
            extent[1] / counts[1] as f64,
            extent[2] / counts[2] as f64,
        );
        let corner = center - extent * 0.5;
        let mut cells = Vec::with_capacity(counts[0] * counts[1] * counts[2]);
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let c = Vec3::new(
                        corner[0] + (i as f64 + 0.5) * size[0],
                        corner[1] + (j as f64 + 0.5) * size[1],
                        corner[2] + (k as f64 + 0.5) * size[2],
                    );
                    cells.push(Cell {
                        center: c,
                        size,
                        susceptibility,
                    });
                }
            }
        }
        Ok(CellMesh { cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(Cell::volume).sum()
    }

    pub fn extend(&mut self, other: CellMesh) {
        self.cells.extend(other.cells);
    }

    pub fn set_uniform_susceptibility(&mut self, chi: f64) {
        for c in &mut self.cells {
            c.susceptibility = chi;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::invalid("mesh has no cells"));
        }
        for (i, c) in self.cells.iter().enumerate() {
            if !(c.volume() > 0.0) {
                return Err(Error::invalid(format!("cell {i} has non-positive volume")));
            }
            if !(c.susceptibility >= 0.0) {
                return Err(Error::invalid(format!("cell {i} has negative susceptibility")));
            }
        }
        for i in 0..self.cells.len() {
            for j in i + 1..self.cells.len() {
                if self.cells[i].overlaps(&self.cells[j]) {
                    return Err(Error::invalid(format!("cells {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }
}

/// Mesh one sheet of the pair. Width runs along y, height along z and the
/// thickness along the displacement axis x.
pub fn mesh_sheet(geom: &SheetPairGeometry, which: SheetSide, density: MeshDensity) -> Result<CellMesh> {
    geom.validate()?;
    let sign = match which {
        SheetSide::Top => 1.0,
        SheetSide::Bottom => -1.0,
    };
    let center = Vec3::new(sign * (geom.half_gap + 0.5 * geom.sheet_thickness), 0.0, 0.0);
    let extent = Vec3::new(geom.sheet_thickness, geom.sheet_width, geom.sheet_height);
    CellMesh::block(
        center,
        extent,
        [density.thickness, density.width, density.height],
        0.0,
    )
}

/// Point dipole source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleSource {
    pub position: Vec3,
    /// Dipole moment, A·m².
    pub moment: Vec3,
}

impl DipoleSource {
    /// The tip magnet at displacement `x`, polarized along the displacement axis.
    pub fn tip(magnet: &MagnetSpec, x: f64) -> Self {
        DipoleSource {
            position: Vec3::new(x, 0.0, 0.0),
            moment: Vec3::new(magnet.dipole_moment(), 0.0, 0.0),
        }
    }
}

/// Dipole field `H = (3(m·r̂)r̂ − m)/(4π r³)` in A/m.
pub fn applied_field(source: &DipoleSource, point: Vec3) -> Result<Vec3> {
    let r = point - source.position;
    let d = r.norm();
    if !(d > 0.0) {
        return Err(Error::Singularity(
            "field point coincides with the dipole".into(),
        ));
    }
    let u = r * (1.0 / d);
    let m = source.moment;
    Ok((u * (3.0 * m.dot(u)) - m) * (1.0 / (4.0 * PI * d * d * d)))
}

/// Field per unit magnetization of a point dipole of volume `volume` at
/// displacement `r`.
fn dipole_kernel(r: Vec3, volume: f64) -> Mat3 {
    let d = r.norm();
    let u = r * (1.0 / d);
    let s = volume / (4.0 * PI * d * d * d);
    let mut k = Mat3::ZERO;
    for a in 0..3 {
        for b in 0..3 {
            k.0[a][b] = s * (3.0 * u[a] * u[b] - if a == b { 1.0 } else { 0.0 });
        }
    }
    k
}

/// `ln(a + sqrt(a² + rest_sq))` without cancellation for negative `a`.
fn log_plus(a: f64, r: f64, rest_sq: f64) -> f64 {
    if a >= 0.0 {
        libm::log(a + r)
    } else {
        libm::log(rest_sq / (r - a))
    }
}

/// Field per unit magnetization at displacement `r` from the centre of a
/// uniformly magnetized prism with half edge lengths `half`.
pub fn prism_field_tensor(r: Vec3, half: Vec3) -> Mat3 {
    let hmax = half[0].max(half[1]).max(half[2]);
    if r.norm() > FAR_FIELD_RATIO * hmax {
        return dipole_kernel(r, 8.0 * half[0] * half[1] * half[2]);
    }
    let mut k = Mat3::ZERO;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let x = r[0] - sx * half[0];
                let y = r[1] - sy * half[1];
                let z = r[2] - sz * half[2];
                let (x2, y2, z2) = (x * x, y * y, z * z);
                let rr = libm::sqrt(x2 + y2 + z2);
                let s = sx * sy * sz;
                k.0[0][0] += s * libm::atan(y * z / (x * rr));
                k.0[1][1] += s * libm::atan(x * z / (y * rr));
                k.0[2][2] += s * libm::atan(x * y / (z * rr));
                k.0[0][1] -= s * log_plus(z, rr, x2 + y2);
                k.0[0][2] -= s * log_plus(y, rr, x2 + z2);
                k.0[1][2] -= s * log_plus(x, rr, y2 + z2);
            }
        }
    }
    k.0[1][0] = k.0[0][1];
    k.0[2][0] = k.0[0][2];
    k.0[2][1] = k.0[1][2];
    k.scale(1.0 / (4.0 * PI))
}

/// Demagnetizing tensor at the centre of a prism with half edges `half`.
/// Its trace is 1 and it equals `I/3` for a cube.
pub fn self_demag_tensor(half: Vec3) -> Mat3 {
    let (a, b, c) = (half[0], half[1], half[2]);
    let r = libm::sqrt(a * a + b * b + c * c);
    let f = 2.0 / PI;
    Mat3::diag(
        f * libm::atan(b * c / (a * r)),
        f * libm::atan(a * c / (b * r)),
        f * libm::atan(a * b / (c * r)),
    )
}

/// Dense `3N×3N` interaction operator `K`.
#[derive(Debug, Clone)]
pub struct InteractionOperator {
    n_cells: usize,
    matrix: DenseMatrix,
}

impl InteractionOperator {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn block(&self, i: usize, j: usize) -> Mat3 {
        let mut b = Mat3::ZERO;
        for a in 0..3 {
            for c in 0..3 {
                b.0[a][c] = self.matrix.get(3 * i + a, 3 * j + c);
            }
        }
        b
    }

    /// System matrix `I − diag(χ) K`.
    pub fn system_matrix(&self, chi: &[f64]) -> DenseMatrix {
        let n = 3 * self.n_cells;
        let mut a = DenseMatrix::zeros(n);
        for row in 0..n {
            let c = chi[row / 3];
            let src = self.matrix.row(row);
            let dst = a.row_mut(row);
            for (d, s) in dst.iter_mut().zip(src) {
                *d = -c * s;
            }
            dst[row] += 1.0;
        }
        a
    }
}

pub fn assemble_system(mesh: &CellMesh) -> Result<InteractionOperator> {
    mesh.validate()?;
    let n = mesh.len();
    let mut matrix = DenseMatrix::zeros(3 * n);
    for (i, ci) in mesh.cells.iter().enumerate() {
        for (j, cj) in mesh.cells.iter().enumerate() {
            let block = if i == j {
                self_demag_tensor(cj.half()).scale(-1.0)
            } else {
                prism_field_tensor(ci.center - cj.center, cj.half())
            };
            for a in 0..3 {
                for b in 0..3 {
                    matrix.set(3 * i + a, 3 * j + b, block.0[a][b]);
                }
            }
        }
    }
    Ok(InteractionOperator { n_cells: n, matrix })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationSolution {
    /// Magnetization per cell, A/m.
    pub magnetization: Vec<Vec3>,
    /// Relative residual of the linear solve.
    pub residual_norm: f64,
}

impl MagnetizationSolution {
    fn zero(n: usize) -> Self {
        MagnetizationSolution {
            magnetization: vec![Vec3::ZERO; n],
            residual_norm: 0.0,
        }
    }
}

fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|c| c.0).collect()
}

fn unflatten(v: &[f64]) -> Vec<Vec3> {
    v.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

/// Solve with an LU factor of `a`, refining once if the residual is loose.
fn solve_checked(a: &DenseMatrix, lu: &LuFactorization, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut x = lu.solve(b);
    let mut res = relative_residual(a, &x, b);
    if res > RESIDUAL_TOLERANCE {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        res = relative_residual(a, &x, b);
    }
    if !(res <= RESIDUAL_TOLERANCE) {
        return Err(Error::NumericalFailure {
            message: format!("magnetization residual {res:.3e} above tolerance"),
            condition_estimate: Some(lu.pivot_ratio),
        });
    }
    Ok((x, res))
}

/// Solve `(I − χK)M = χH` for an arbitrary applied field, with each cell's
/// own susceptibility.
pub fn solve_with_field(
    mesh: &CellMesh,
    op: &InteractionOperator,
    h_applied: &[Vec3],
) -> Result<MagnetizationSolution> {
    let n = mesh.len();
    if op.n_cells() != n || h_applied.len() != n {
        return Err(Error::invalid("mesh, operator and field sizes disagree"));
    }
    let chi: Vec<f64> = mesh.cells.iter().map(|c| c.susceptibility).collect();
    if chi.iter().all(|&c| c == 0.0) {
        return Ok(MagnetizationSolution::zero(n));
    }
    let a = op.system_matrix(&chi);
    let lu = LuFactorization::new(a.clone())?;
    let b: Vec<f64> = h_applied
        .iter()
        .zip(&chi)
        .flat_map(|(h, &c)| (*h * c).0)
        .collect();
    let (x, residual_norm) = solve_checked(&a, &lu, &b)?;
    Ok(MagnetizationSolution {
        magnetization: unflatten(&x),
        residual_norm,
    })
}

/// Magnetize the mesh, at uniform `χ(temp)`, in the field of `magnet`.
pub fn solve_magnetization(
    mesh: &CellMesh,
    magnet: &DipoleSource,
    temp: f64,
    mat: &ThermoMagneticMaterial,
) -> Result<MagnetizationSolution> {
    let chi = mat.susceptibility(temp)?;
    if chi < 0.0 {
        return Err(Error::invalid("susceptibility must be >= 0"));
    }
    let mut mesh = mesh.clone();
    mesh.set_uniform_susceptibility(chi);
    if chi == 0.0 {
        mesh.validate()?;
        return Ok(MagnetizationSolution::zero(mesh.len()));
    }
    let op = assemble_system(&mesh)?;
    let h = mesh
        .cells
        .iter()
        .map(|c| applied_field(magnet, c.center))
        .collect::<Result<Vec<_>>>()?;
    solve_with_field(&mesh, &op, &h)
}

/// Force on dipole `m1` at `p1` exerted by dipole `m2` at `p2`.
pub fn dipole_dipole_force(m1: Vec3, p1: Vec3, m2: Vec3, p2: Vec3) -> Vec3 {
    let r = p1 - p2;
    let d = r.norm();
    let u = r * (1.0 / d);
    let (a, b) = (u.dot(m1), u.dot(m2));
    let s = 3.0 * MU0 / (4.0 * PI * d * d * d * d);
    (m1 * b + m2 * a + u * m1.dot(m2) - u * (5.0 * a * b)) * s
}

/// Reaction force (N) of the magnetized cells on the source dipole.
pub fn force_on_magnet(mesh: &CellMesh, solution: &MagnetizationSolution, magnet: &DipoleSource) -> Vec3 {
    mesh.cells
        .iter()
        .zip(&solution.magnetization)
        .fold(Vec3::ZERO, |acc, (c, m)| {
            acc + dipole_dipole_force(magnet.moment, magnet.position, *m * c.volume(), c.center)
        })
}

/// Force exerted by the source dipole on each magnetized cell.
pub fn forces_on_cells(mesh: &CellMesh, solution: &MagnetizationSolution, magnet: &DipoleSource) -> Vec<Vec3> {
    mesh.cells
        .iter()
        .zip(&solution.magnetization)
        .map(|(c, m)| dipole_dipole_force(*m * c.volume(), c.center, magnet.moment, magnet.position))
        .collect()
}

/// Moment-method force backend for the sheet pair. The interaction operator
/// depends only on the mesh, so it is assembled once.
#[derive(Debug, Clone)]
pub struct MomentSheetModel {
    pub geom: SheetPairGeometry,
    pub magnet: MagnetSpec,
    pub material: ThermoMagneticMaterial,
    mesh: CellMesh,
    operator: InteractionOperator,
}

impl MomentSheetModel {
    pub fn new(
        geom: SheetPairGeometry,
        magnet: MagnetSpec,
        material: ThermoMagneticMaterial,
        density: MeshDensity,
    ) -> Result<Self> {
        magnet.validate()?;
        material.validate()?;
        let mut mesh = mesh_sheet(&geom, SheetSide::Top, density)?;
        mesh.extend(mesh_sheet(&geom, SheetSide::Bottom, density)?);
        let operator = assemble_system(&mesh)?;
        Ok(MomentSheetModel {
            geom,
            magnet,
            material,
            mesh,
            operator,
        })
    }

    pub fn mesh(&self) -> &CellMesh {
        &self.mesh
    }

    /// Axial force at every displacement in `xs`, sharing one factorization.
    pub fn force_row(&self, temp: f64, xs: &[f64]) -> Result<Vec<f64>> {
        let chi = self.material.susceptibility(temp)?;
        if chi == 0.0 {
            return Ok(vec![0.0; xs.len()]);
        }
        let chis = vec![chi; self.mesh.len()];
        let a = self.operator.system_matrix(&chis);
        let lu = LuFactorization::new(a.clone()).map_err(|e| match e {
            Error::NumericalFailure {
                message,
                condition_estimate,
            } => Error::NumericalFailure {
                message: format!("moment system at T = {temp}: {message}"),
                condition_estimate,
            },
            other => other,
        })?;
        let mut mesh = self.mesh.clone();
        mesh.set_uniform_susceptibility(chi);
        xs.iter()
            .map(|&x| {
                let src = DipoleSource::tip(&self.magnet, x);
                let h = mesh
                    .cells
                    .iter()
                    .map(|c| applied_field(&src, c.center))
                    .collect::<Result<Vec<_>>>()?;
                let b: Vec<f64> = flatten(&h).into_iter().map(|v| v * chi).collect();
                let (m, residual_norm) = solve_checked(&a, &lu, &b).map_err(|e| match e {
                    Error::NumericalFailure {
                        message,
                        condition_estimate,
                    } => Error::NumericalFailure {
                        message: format!("moment node (x = {x}, T = {temp}): {message}"),
                        condition_estimate,
                    },
                    other => other,
                })?;
                let sol = MagnetizationSolution {
                    magnetization: unflatten(&m),
                    residual_norm,
                };
                Ok(force_on_magnet(&mesh, &sol, &src)[0])
            })
            .collect()
    }
}

impl ForceModel for MomentSheetModel {
    fn force(&self, x: f64, temp: f64) -> Result<f64> {
        Ok(self.force_row(temp, &[x])?[0])
    }
}
