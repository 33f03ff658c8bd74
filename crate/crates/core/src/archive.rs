//! Grid archives: the soft (annealed) archive that drives the emitters and
//! the result archive that keeps the best solution ever seen per cell.

use std::io::{self, Write};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArchiveError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("measure {index} is not finite")]
    NonFiniteMeasure { index: usize },
    #[error("objective is not finite")]
    NonFiniteObjective,
    #[error("expected {expected} measures, got {actual}")]
    MeasureDimension { expected: usize, actual: usize },
    #[error("archive is empty")]
    Empty,
    #[error("soft and result archives use different grids")]
    GridMismatch,
    #[error("invalid archive parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

/// An evaluated solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRecord {
    pub params: Vec<f64>,
    pub objective: f64,
    pub measures: Vec<f64>,
}

impl SolutionRecord {
    pub fn new(params: Vec<f64>, objective: f64, measures: Vec<f64>) -> Self {
        SolutionRecord {
            params,
            objective,
            measures,
        }
    }
}

/// Uniform grid over a box in measure space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dims: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl GridSpec {
    pub fn new(dims: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ArchiveError> {
        if dims.is_empty() {
            return Err(ArchiveError::InvalidGrid("at least one measure dimension required".into()));
        }
        if lower.len() != dims.len() || upper.len() != dims.len() {
            return Err(ArchiveError::InvalidGrid(format!(
                "{} dims but {} lower and {} upper bounds",
                dims.len(),
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(ArchiveError::InvalidGrid(format!("dimension {i} has zero cells")));
        }
        for i in 0..dims.len() {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(ArchiveError::InvalidGrid(format!(
                    "bounds for dimension {i} must be finite with lower < upper"
                )));
            }
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| ArchiveError::InvalidGrid("cell count overflows".into()))?;
        Ok(GridSpec { dims, lower, upper })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn measure_dim(&self) -> usize {
        self.dims.len()
    }

    /// Total number of cells `M`.
    pub fn cells(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-major flat index of the cell containing `measures`. Measures
    /// outside the bounds are clipped into the boundary cell; a measure
    /// exactly at the upper bound lands in the last cell.
    pub fn cell_index(&self, measures: &[f64]) -> Result<usize, ArchiveError> {
        if measures.len() != self.dims.len() {
            return Err(ArchiveError::MeasureDimension {
                expected: self.dims.len(),
                actual: measures.len(),
            });
        }
        let mut flat = 0usize;
        for (i, &m) in measures.iter().enumerate() {
            if !m.is_finite() {
                return Err(ArchiveError::NonFiniteMeasure { index: i });
            }
            let cells = self.dims[i];
            let frac = (m - self.lower[i]) / (self.upper[i] - self.lower[i]);
            let idx = (frac * cells as f64).floor();
            let idx = if idx <= 0.0 {
                0
            } else {
                (idx as usize).min(cells - 1)
            };
            flat = flat * cells + idx;
        }
        Ok(flat)
    }

    /// Per-dimension grid coordinates of a flat index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut coords = vec![0; self.dims.len()];
        for (c, &d) in coords.iter_mut().zip(&self.dims).rev() {
            *c = flat % d;
            flat /= d;
        }
        coords
    }
}

/// Soft archive cell: occupant plus acceptance threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCell {
    pub occupant: Option<SolutionRecord>,
    pub threshold: f64,
}

/// Archive whose cells accept any solution that beats the cell's threshold;
/// thresholds follow `t ← (1 - α) t + α f` on each acceptance.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftArchive {
    spec: GridSpec,
    alpha: f64,
    min_f: f64,
    cells: Vec<SoftCell>,
    occupied: Vec<usize>,
}

impl SoftArchive {
    pub fn new(spec: GridSpec, alpha: f64, min_f: f64) -> Result<Self, ArchiveError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ArchiveError::InvalidParameter {
                name: "alpha",
                reason: format!("must lie in [0, 1], got {alpha}"),
            });
        }
        if !min_f.is_finite() {
            return Err(ArchiveError::InvalidParameter {
                name: "min_f",
                reason: "must be finite".into(),
            });
        }
        let cells = vec![
            SoftCell {
                occupant: None,
                threshold: min_f,
            };
            spec.cells()
        ];
        Ok(SoftArchive {
            spec,
            alpha,
            min_f,
            cells,
            occupied: Vec::new(),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn min_f(&self) -> f64 {
        self.min_f
    }

    pub fn cell(&self, index: usize) -> &SoftCell {
        &self.cells[index]
    }

    pub fn threshold(&self, index: usize) -> f64 {
        self.cells[index].threshold
    }

    pub fn thresholds(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.threshold)
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    /// Occupant of a uniformly random occupied cell.
    pub fn random_elite<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&SolutionRecord, ArchiveError> {
        if self.occupied.is_empty() {
            return Err(ArchiveError::Empty);
        }
        let cell = self.occupied[rng.random_range(0..self.occupied.len())];
        Ok(self.cells[cell]
            .occupant
            .as_ref()
            .expect("occupied list only holds filled cells"))
    }

    /// Occupied cells in index order.
    pub fn snapshot(&self) -> Vec<(usize, &SoftCell)> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.occupant.is_some())
            .collect()
    }

    /// Soft-archive half of [`insert`]: returns `(Δ, accepted)`.
    fn offer(&mut self, cell: usize, s: &SolutionRecord) -> (f64, bool) {
        let entry = &mut self.cells[cell];
        let f = s.objective;
        let improvement = f - entry.threshold;
        if f > entry.threshold {
            if entry.occupant.is_none() {
                self.occupied.push(cell);
            }
            entry.occupant = Some(s.clone());
            // Round-off in the polyak average must never lower a threshold.
            let next = (1.0 - self.alpha) * entry.threshold + self.alpha * f;
            entry.threshold = next.max(entry.threshold);
            (improvement, true)
        } else {
            (improvement, false)
        }
    }

    /// Writes `cell_index,m_0,...,m_{d-1},objective,threshold`, one row per
    /// occupied cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write_header(&mut out, self.spec.measure_dim(), true)?;
        for (index, cell) in self.snapshot() {
            let occ = cell.occupant.as_ref().expect("snapshot holds occupied cells");
            write!(out, "{index}")?;
            for m in &occ.measures {
                write!(out, ",{m}")?;
            }
            writeln!(out, ",{},{}", occ.objective, cell.threshold)?;
        }
        Ok(())
    }
}

/// Best-ever solution per cell.
///
/// An empty cell only accepts solutions with `f > min_f`, mirroring the soft
/// archive's first insertion, so both archives always have the same
/// occupied cells and every stored objective exceeds `min_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultArchive {
    spec: GridSpec,
    min_f: f64,
    cells: Vec<Option<SolutionRecord>>,
    occupied: usize,
    objective_sum: f64,
    best: Option<f64>,
}

impl ResultArchive {
    pub fn new(spec: GridSpec, min_f: f64) -> Result<Self, ArchiveError> {
        if !min_f.is_finite() {
            return Err(ArchiveError::InvalidParameter {
                name: "min_f",
                reason: "must be finite".into(),
            });
        }
        let cells = vec![None; spec.cells()];
        Ok(ResultArchive {
            spec,
            min_f,
            cells,
            occupied: 0,
            objective_sum: 0.0,
            best: None,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn min_f(&self) -> f64 {
        self.min_f
    }

    pub fn get(&self, index: usize) -> Option<&SolutionRecord> {
        self.cells[index].as_ref()
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    /// Running sum of stored objectives, maintained on insertion.
    pub fn objective_sum(&self) -> f64 {
        self.objective_sum
    }

    /// Highest stored objective.
    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// Occupied cells in strictly increasing cell-index order.
    pub fn snapshot(&self) -> Vec<(usize, &SolutionRecord)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|s| (i, s)))
            .collect()
    }

    fn offer(&mut self, cell: usize, s: &SolutionRecord) -> bool {
        let f = s.objective;
        let replace = match &self.cells[cell] {
            Some(old) => f > old.objective,
            None => f > self.min_f,
        };
        if replace {
            match self.cells[cell].replace(s.clone()) {
                Some(old) => self.objective_sum += f - old.objective,
                None => {
                    self.occupied += 1;
                    self.objective_sum += f;
                }
            }
            if self.best.is_none_or(|b| f > b) {
                self.best = Some(f);
            }
        }
        replace
    }

    /// Writes `cell_index,m_0,...,m_{d-1},objective`, one row per occupied
    /// cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write_header(&mut out, self.spec.measure_dim(), false)?;
        for (index, s) in self.snapshot() {
            write!(out, "{index}")?;
            for m in &s.measures {
                write!(out, ",{m}")?;
            }
            writeln!(out, ",{}", s.objective)?;
        }
        Ok(())
    }

    /// Dense objective grid for 2-D archives: header `row,0,...,cols-1`,
    /// then one line per first-measure cell with blanks for empty cells.
    pub fn write_heatmap<W: Write>(&self, out: W) -> io::Result<()> {
        let dims = self.spec.dims();
        if dims.len() != 2 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "heatmaps are only defined for 2-D archives",
            ));
        }
        let objectives: Vec<Option<f64>> = self.cells.iter().map(|c| c.as_ref().map(|s| s.objective)).collect();
        write_heatmap(out, dims[0], dims[1], &objectives)
    }
}

fn write_header<W: Write>(out: &mut W, measure_dim: usize, threshold: bool) -> io::Result<()> {
    write!(out, "cell_index")?;
    for i in 0..measure_dim {
        write!(out, ",m_{i}")?;
    }
    write!(out, ",objective")?;
    if threshold {
        write!(out, ",threshold")?;
    }
    writeln!(out)
}

/// Writes a dense `rows × cols` heatmap of row-major cell values.
pub fn write_heatmap<W: Write>(
    mut out: W,
    rows: usize,
    cols: usize,
    values: &[Option<f64>],
) -> io::Result<()> {
    write!(out, "row")?;
    for c in 0..cols {
        write!(out, ",{c}")?;
    }
    writeln!(out)?;
    for r in 0..rows {
        write!(out, "{r}")?;
        for c in 0..cols {
            match values[r * cols + c] {
                Some(v) => write!(out, ",{v}")?,
                None => write!(out, ",")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Outcome of inserting one solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertResult {
    /// `f - t_e` against the threshold before the insertion.
    pub improvement: f64,
    /// Whether the soft archive accepted the solution (`f > t_e`).
    pub accepted: bool,
    pub cell: usize,
}

/// Inserts `s` into both archives.
///
/// The soft archive takes `s` iff `f > t_e` and then moves `t_e` toward `f`;
/// the result archive takes it iff it beats the cell's best so far. Inputs
/// are validated before either archive is touched.
pub fn insert(
    soft: &mut SoftArchive,
    result: &mut ResultArchive,
    s: SolutionRecord,
) -> Result<InsertResult, ArchiveError> {
    if soft.spec != result.spec {
        return Err(ArchiveError::GridMismatch);
    }
    if !s.objective.is_finite() {
        return Err(ArchiveError::NonFiniteObjective);
    }
    let cell = soft.spec.cell_index(&s.measures)?;
    let (improvement, accepted) = soft.offer(cell, &s);
    result.offer(cell, &s);
    Ok(InsertResult {
        improvement,
        accepted,
        cell,
    })
}
