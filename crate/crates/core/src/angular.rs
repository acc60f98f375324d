//! Angular grid over the upper wavenumber hemisphere, field-response
//! matrices and antenna layouts.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{CMatrix, Complex64, Error, Result};

/// Relative slack used when testing constraints that a lattice meets with equality.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// Cell-center discretization of the upper hemisphere of radius `2π/λ`.
#[derive(Clone, Debug)]
pub struct AngularGrid {
    n_elevation: usize,
    n_azimuth: usize,
    wavelength: f64,
    wavenumber: f64,
    wavevectors: Vec<[f64; 3]>,
    areas: Vec<f64>,
}

impl AngularGrid {
    pub fn new(n_elevation: usize, n_azimuth: usize, wavelength: f64) -> Result<Self> {
        if n_elevation == 0 || n_azimuth == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least one cell per axis, got {n_elevation}x{n_azimuth}"
            )));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        let k0 = 2.0 * PI / wavelength;
        let d_theta = FRAC_PI_2 / n_elevation as f64;
        let d_phi = 2.0 * PI / n_azimuth as f64;
        let len = n_elevation * n_azimuth;
        let mut wavevectors = Vec::with_capacity(len);
        let mut areas = Vec::with_capacity(len);
        for i in 0..n_elevation {
            let lo = i as f64 * d_theta;
            let hi = if i + 1 == n_elevation { FRAC_PI_2 } else { (i + 1) as f64 * d_theta };
            let theta = (i as f64 + 0.5) * d_theta;
            let area = k0 * k0 * (hi.sin() - lo.sin()) * d_phi;
            let (st, ct) = theta.sin_cos();
            for j in 0..n_azimuth {
                let phi = (j as f64 + 0.5) * d_phi;
                let (sp, cp) = phi.sin_cos();
                wavevectors.push([k0 * ct * cp, k0 * ct * sp, k0 * st]);
                areas.push(area);
            }
        }
        Ok(AngularGrid { n_elevation, n_azimuth, wavelength, wavenumber: k0, wavevectors, areas })
    }

    pub fn n_elevation(&self) -> usize {
        self.n_elevation
    }

    pub fn n_azimuth(&self) -> usize {
        self.n_azimuth
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// `κ0 = 2π/λ` in rad/m.
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    /// Number of cells `L0`.
    pub fn len(&self) -> usize {
        self.wavevectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavevectors.is_empty()
    }

    /// Cell-center wavevectors, elevation-major.
    pub fn wavevectors(&self) -> &[[f64; 3]] {
        &self.wavevectors
    }

    /// Cell surface areas on the radius-`κ0` sphere.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Power density per unit area for a spectrum defined on this grid.
    pub fn density(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "spectrum has {} entries, grid has {}",
                values.len(),
                self.len()
            )));
        }
        Ok(values.iter().zip(&self.areas).map(|(b, w)| b / w).collect())
    }
}

pub fn build_grid(n_elevation: usize, n_azimuth: usize, wavelength: f64) -> Result<AngularGrid> {
    AngularGrid::new(n_elevation, n_azimuth, wavelength)
}

/// Rectangular moving region centered at the origin plus the minimum spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub size_x: f64,
    pub size_y: f64,
    pub min_spacing: f64,
}

impl Region {
    pub fn new(size_x: f64, size_y: f64, min_spacing: f64) -> Result<Self> {
        if !(size_x > 0.0 && size_y > 0.0 && size_x.is_finite() && size_y.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "region sides must be positive, got {size_x} x {size_y}"
            )));
        }
        if !(min_spacing >= 0.0 && min_spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "minimum spacing must be nonnegative, got {min_spacing}"
            )));
        }
        Ok(Region { size_x, size_y, min_spacing })
    }

    /// Square region of side `side` with the given spacing.
    pub fn square(side: f64, min_spacing: f64) -> Result<Self> {
        Region::new(side, side, min_spacing)
    }
}

/// Planar antenna positions in meters, together with their constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayLayout {
    positions: Vec<[f64; 2]>,
    region: Region,
}

impl ArrayLayout {
    pub fn new(positions: Vec<[f64; 2]>, region: Region) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("layout has no antennas".into()));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("layout has non-finite coordinates".into()));
        }
        Ok(ArrayLayout { positions, region })
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same antennas, different constraints.
    pub fn with_region(&self, region: Region) -> Self {
        ArrayLayout { positions: self.positions.clone(), region }
    }

    /// Moves every antenna by `step * direction`; `direction` stacks all x then all y.
    pub fn displaced(&self, direction: &[f64], step: f64) -> Self {
        let n = self.len();
        debug_assert_eq!(direction.len(), 2 * n);
        let positions = self
            .positions
            .iter()
            .enumerate()
            .map(|(i, p)| [p[0] + step * direction[i], p[1] + step * direction[n + i]])
            .collect();
        ArrayLayout { positions, region: self.region }
    }

    /// Euclidean norm of the stacked coordinate difference.
    pub fn distance_to(&self, other: &ArrayLayout) -> f64 {
        self.positions
            .iter()
            .zip(&other.positions)
            .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Strict version of the region and spacing constraints.
    pub fn is_strictly_interior(&self) -> bool {
        let hx = self.region.size_x / 2.0;
        let hy = self.region.size_y / 2.0;
        if self.positions.iter().any(|p| p[0].abs() >= hx || p[1].abs() >= hy) {
            return false;
        }
        let d2 = self.region.min_spacing * self.region.min_spacing;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                if (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) <= d2 {
                    return false;
                }
            }
        }
        true
    }

    /// Writes `x_m,y_m` rows with 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_m", "y_m"])?;
        for p in &self.positions {
            w.write_record([format!("{:.11e}", p[0]), format!("{:.11e}", p[1])])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, region: Region) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x_m", "y_m"] {
            return Err(Error::Parse(format!("expected header x_m,y_m, found {:?}", headers)));
        }
        let mut positions = Vec::new();
        for record in r.records() {
            let record = record?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad coordinate {s:?}: {e}")))
            };
            positions.push([parse(&record[0])?, parse(&record[1])?]);
        }
        ArrayLayout::new(positions, region)
    }
}

/// Field-response matrix `L0 × N` with entries `exp(j κ_l · [x_n, y_n, 0])`.
pub fn frm(grid: &AngularGrid, layout: &ArrayLayout) -> CMatrix {
    let wv = grid.wavevectors();
    let pos = layout.positions();
    CMatrix::from_fn(wv.len(), pos.len(), |l, n| {
        let phase = wv[l][0] * pos[n][0] + wv[l][1] * pos[n][1];
        Complex64::from_polar(1.0, phase)
    })
}

fn lattice(rows: usize, cols: usize, dx: f64, dy: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y = (r as f64 - (rows as f64 - 1.0) / 2.0) * dy;
        for c in 0..cols {
            let x = (c as f64 - (cols as f64 - 1.0) / 2.0) * dx;
            out.push([x, y]);
        }
    }
    out
}

/// Centered `rows × cols` lattice with a fixed spacing, rows along y.
pub fn upa_dense(rows: usize, cols: usize, spacing: f64, region: Region) -> Result<ArrayLayout> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("lattice needs at least one row and column".into()));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing}")));
    }
    ArrayLayout::new(lattice(rows, cols, spacing, spacing), region)
}

/// Centered lattice stretched to fill the region: spacings `S_x/cols` and `S_y/rows`.
pub fn upa_sparse(rows: usize, cols: usize, region: Region) -> Result<ArrayLayout> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("lattice needs at least one row and column".into()));
    }
    let dx = region.size_x / cols as f64;
    let dy = region.size_y / rows as f64;
    let floor = region.min_spacing * (1.0 - FEASIBILITY_SLACK);
    if (cols > 1 && dx < floor) || (rows > 1 && dy < floor) {
        return Err(Error::Infeasible(format!(
            "sparse lattice spacing {dx:.4e} x {dy:.4e} m is below the minimum {:.4e} m",
            region.min_spacing
        )));
    }
    ArrayLayout::new(lattice(rows, cols, dx, dy), region)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Violation {
    /// Antenna outside `|t| ≤ S_t/2`; `axis` is 0 for x and 1 for y.
    Region { antenna: usize, axis: usize, coordinate: f64, limit: f64 },
    Spacing { first: usize, second: usize, distance: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the closed region and spacing constraints and lists every violation.
pub fn check_feasible(layout: &ArrayLayout) -> Feasibility {
    let region = layout.region();
    let limits = [region.size_x / 2.0, region.size_y / 2.0];
    let mut violations = Vec::new();
    for (n, p) in layout.positions().iter().enumerate() {
        for axis in 0..2 {
            if p[axis].abs() > limits[axis] * (1.0 + FEASIBILITY_SLACK) {
                violations.push(Violation::Region { antenna: n, axis, coordinate: p[axis], limit: limits[axis] });
            }
        }
    }
    let floor = region.min_spacing * (1.0 - FEASIBILITY_SLACK);
    let pos = layout.positions();
    for i in 0..pos.len() {
        for k in i + 1..pos.len() {
            let distance = ((pos[i][0] - pos[k][0]).powi(2) + (pos[i][1] - pos[k][1]).powi(2)).sqrt();
            if distance < floor {
                violations.push(Violation::Spacing { first: i, second: k, distance });
            }
        }
    }
    Feasibility { violations }
}
