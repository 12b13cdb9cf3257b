//! Orbit clouds of the natural extension, simplex rasters and the symmetry
//! probe used to study the domain of ARP's natural extension.

use std::fmt;

use rayon::prelude::*;

use crate::algorithms::{AlgorithmSpec, BranchId, FloatKernel};
use crate::error::{McfError, Result};
use crate::linalg::ConeVector;
use crate::natext::NatExtState;
use crate::rng::{positive_unit_vector, seeded_rng, uniform_simplex};

/// One point `(xₙ, aₙ)` of an orbit, both normalized to the unit simplex,
/// with the branch of `M(xₙ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSample {
    pub n: u64,
    pub branch: BranchId,
    pub x: Vec<f64>,
    pub a: Vec<f64>,
}

impl OrbitSample {
    /// Section coordinates `bᵢ = (aᵢ − a_d)/⟨x, a⟩` for `i < d`.
    pub fn difference_coords(&self) -> Vec<f64> {
        let d = self.a.len();
        let e: f64 = self.x.iter().zip(&self.a).map(|(x, a)| x * a).sum();
        self.a[..d - 1]
            .iter()
            .map(|ai| (ai - self.a[d - 1]) / e)
            .collect()
    }
}

/// Random float start: `x` uniform on the simplex, `a` uniform in the cube.
/// Sorted domains receive a sorted `x`.
pub fn random_start(spec: &AlgorithmSpec, seed: u64) -> Result<NatExtState<f64>> {
    let mut rng = seeded_rng(seed, 0);
    let mut x = uniform_simplex(&mut rng, spec.dim());
    if spec.domain() != &crate::cone::Cone::positive(spec.dim()) {
        x.sort_by(f64::total_cmp);
    }
    let a = positive_unit_vector(&mut rng, spec.dim());
    NatExtState::new(ConeVector::new(x)?, ConeVector::new(a)?)
}

/// Streaming orbit of `F̃` with both coordinates renormalized every step.
/// Yields `n + 1` samples (the start and `n` iterates); a boundary hit ends
/// the stream with one `Err` item.
pub struct OrbitIter {
    kernel: FloatKernel,
    x: Vec<f64>,
    a: Vec<f64>,
    n: u64,
    remaining: u64,
    done: bool,
}

impl Iterator for OrbitIter {
    type Item = Result<OrbitSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let branch = match self.kernel.spec().classify(&self.x) {
            Ok(b) => b,
            Err(e) => {
                self.done = true;
                return Some(Err(e));
            }
        };
        let sample = OrbitSample {
            n: self.n,
            branch,
            x: self.x.clone(),
            a: self.a.clone(),
        };
        if self.remaining == 0 {
            self.done = true;
        } else {
            self.remaining -= 1;
            self.n += 1;
            if let Err(e) = self.advance() {
                self.done = true;
                let _ = e;
            }
        }
        Some(Ok(sample))
    }
}

impl OrbitIter {
    fn advance(&mut self) -> Result<()> {
        self.kernel.step(&mut self.x, Some(&mut self.a))?;
        normalize(&mut self.x)?;
        normalize(&mut self.a)
    }
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|c| *c /= s);
    if v.iter().all(|c| c.is_finite() && *c > 0.0) {
        Ok(())
    } else {
        Err(McfError::NonFinite("orbit renormalization"))
    }
}

/// Orbit of `F̃` from `start`. The orbit is a function of `start` alone; the
/// seed only selects a random start when `start` is `None`.
pub fn orbit_cloud(
    spec: &AlgorithmSpec,
    start: Option<&NatExtState<f64>>,
    n: u64,
    seed: u64,
) -> Result<OrbitIter> {
    let start = match start {
        Some(s) => s.clone(),
        None => random_start(spec, seed)?,
    };
    if start.dim() != spec.dim() {
        return Err(McfError::DimensionMismatch {
            expected: spec.dim(),
            got: start.dim(),
        });
    }
    let mut x = start.x().coords().to_vec();
    let mut a = start.a().coords().to_vec();
    normalize(&mut x)?;
    normalize(&mut a)?;
    Ok(OrbitIter {
        kernel: FloatKernel::new(spec),
        x,
        a,
        n: 0,
        remaining: n,
        done: false,
    })
}

/// CSV header for orbit samples: `n,branch,x1..xd,a1..ad`.
pub fn orbit_csv_header(d: usize) -> String {
    let mut h = String::from("n,branch");
    for i in 1..=d {
        h.push_str(&format!(",x{i}"));
    }
    for i in 1..=d {
        h.push_str(&format!(",a{i}"));
    }
    h.push('\n');
    h
}

pub fn orbit_csv_row(spec: &AlgorithmSpec, s: &OrbitSample) -> String {
    let mut row = format!("{},{}", s.n, spec.label(s.branch));
    for c in s.x.iter().chain(&s.a) {
        row.push_str(&format!(",{c:.17e}"));
    }
    row.push('\n');
    row
}

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Images of the simplex vertices: unit circumradius, centroid at the origin,
/// first vertex straight up.
pub const EMBED_VERTICES: [[f64; 2]; 3] = [[0.0, 1.0], [-SQRT3_2, -0.5], [SQRT3_2, -0.5]];

/// Barycentric embedding of a point of the 2-simplex into the plane.
pub fn simplex_embed(p: &[f64]) -> Result<[f64; 2]> {
    if p.len() != 3 {
        return Err(McfError::Unsupported(format!(
            "the planar embedding needs 3 coordinates, got {}",
            p.len()
        )));
    }
    let s: f64 = p.iter().sum();
    let mut out = [0.0; 2];
    for (w, v) in p.iter().zip(&EMBED_VERTICES) {
        out[0] += w / s * v[0];
        out[1] += w / s * v[1];
    }
    Ok(out)
}

/// Barycentric coordinates of a plane point (inverse of [`simplex_embed`]).
pub fn simplex_unembed(q: [f64; 2]) -> [f64; 3] {
    let [v0, v1, v2] = EMBED_VERTICES;
    let det = (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (v1[1] - v0[1]);
    let l1 = ((q[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (q[1] - v0[1])) / det;
    let l2 = ((v1[0] - v0[0]) * (q[1] - v0[1]) - (q[0] - v0[0]) * (v1[1] - v0[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Coordinates plotted for the dual vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotCoords {
    /// Planar embedding of the normalized `aₙ`.
    Embed,
    /// Section differences `(b₁, b₂)`.
    Difference,
}

/// Plane rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Window {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) || ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite())
        {
            return Err(McfError::Domain(format!(
                "empty window [{xmin},{xmax}]x[{ymin},{ymax}]"
            )));
        }
        Ok(Window {
            xmin,
            xmax,
            ymin,
            ymax,
        })
    }

    /// `[−r, r]²`.
    pub fn centered(r: f64) -> Result<Self> {
        Self::new(-r, r, -r, r)
    }

    pub fn intersects(&self, other: &Window) -> bool {
        self.xmin < other.xmax
            && other.xmin < self.xmax
            && self.ymin < other.ymax
            && other.ymin < self.ymax
    }
}

/// Bounding box of the embedded simplex.
pub fn embedding_range() -> Window {
    Window {
        xmin: -SQRT3_2,
        xmax: SQRT3_2,
        ymin: -0.5,
        ymax: 1.0,
    }
}

/// Overwrite policy for pixels hit by several points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrawOrder {
    /// The last point drawn wins.
    Sequential,
    /// Points in Poincaré branches (ARP) win over Arnoux-Rauzy points.
    PoincareLast,
    /// Points in Arnoux-Rauzy branches (ARP) win over Poincaré points.
    ArLast,
}

impl DrawOrder {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(DrawOrder::Sequential),
            "poincare-last" => Ok(DrawOrder::PoincareLast),
            "ar-last" => Ok(DrawOrder::ArLast),
            _ => Err(McfError::Parse(format!("unknown draw order {s:?}"))),
        }
    }

    fn class(&self, spec: &AlgorithmSpec, branch: BranchId) -> u8 {
        let ar = spec.is_arnoux_rauzy_branch(branch);
        match self {
            DrawOrder::Sequential => 0,
            DrawOrder::PoincareLast => u8::from(!ar),
            DrawOrder::ArLast => u8::from(ar),
        }
    }
}

impl fmt::Display for DrawOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DrawOrder::Sequential => "sequential",
            DrawOrder::PoincareLast => "poincare-last",
            DrawOrder::ArLast => "ar-last",
        })
    }
}

/// Last writer of a pixel: larger keys win.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PixelKey {
    pub class: u8,
    pub step: u64,
    pub branch: u32,
}

/// Accumulation buffer over a plane window; row 0 is the top.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterGrid {
    window: Window,
    width: usize,
    height: usize,
    keys: Vec<Option<PixelKey>>,
    hits: Vec<u32>,
}

impl RasterGrid {
    pub fn new(window: Window, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(McfError::Domain("raster needs at least one pixel".into()));
        }
        Ok(RasterGrid {
            window,
            width,
            height,
            keys: vec![None; width * height],
            hits: vec![0; width * height],
        })
    }

    /// Rebuilds a raster from RGB bytes written by [`RasterGrid::to_rgb`]:
    /// palette colors become branch ids, white pixels stay empty and any
    /// other color counts as occupied with an unknown branch.
    pub fn from_rgb(window: Window, width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        let mut grid = Self::new(window, width, height)?;
        if rgb.len() != 3 * width * height {
            return Err(McfError::DimensionMismatch {
                expected: 3 * width * height,
                got: rgb.len(),
            });
        }
        for (i, px) in rgb.chunks_exact(3).enumerate() {
            if px == [255, 255, 255] {
                continue;
            }
            let branch = PALETTE
                .iter()
                .position(|c| c == px)
                .map_or(u32::MAX, |b| b as u32);
            grid.keys[i] = Some(PixelKey {
                class: 0,
                step: 0,
                branch,
            });
            grid.hits[i] = 1;
        }
        Ok(grid)
    }

    /// Parses a binary portable pixmap with maxval 255.
    pub fn from_p6(window: Window, bytes: &[u8]) -> Result<Self> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(McfError::Parse("truncated P6 header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        let number = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| McfError::Parse(format!("bad P6 header field {s:?}")))
        };
        if fields[0] != "P6" || number(&fields[3])? != 255 {
            return Err(McfError::Parse(
                "expected a P6 image with maxval 255".into(),
            ));
        }
        Self::from_rgb(
            window,
            number(&fields[1])?,
            number(&fields[2])?,
            &bytes[(pos + 1).min(bytes.len())..],
        )
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_of(&self, q: [f64; 2]) -> Option<usize> {
        let w = &self.window;
        let fx = (q[0] - w.xmin) / (w.xmax - w.xmin);
        let fy = (w.ymax - q[1]) / (w.ymax - w.ymin);
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            return None;
        }
        let px = ((fx * self.width as f64) as usize).min(self.width - 1);
        let py = ((fy * self.height as f64) as usize).min(self.height - 1);
        Some(py * self.width + px)
    }

    /// Plane coordinates of the centre of pixel `index`.
    pub fn pixel_center(&self, index: usize) -> [f64; 2] {
        let w = &self.window;
        let (px, py) = (index % self.width, index / self.width);
        [
            w.xmin + (px as f64 + 0.5) / self.width as f64 * (w.xmax - w.xmin),
            w.ymax - (py as f64 + 0.5) / self.height as f64 * (w.ymax - w.ymin),
        ]
    }

    pub fn plot(&mut self, q: [f64; 2], key: PixelKey) {
        if let Some(i) = self.pixel_of(q) {
            self.hits[i] = self.hits[i].saturating_add(1);
            if self.keys[i].is_none_or(|k| k < key) {
                self.keys[i] = Some(key);
            }
        }
    }

    pub fn key(&self, index: usize) -> Option<PixelKey> {
        self.keys[index]
    }

    pub fn hits(&self, index: usize) -> u32 {
        self.hits[index]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn occupied(&self) -> usize {
        self.keys.iter().filter(|k| k.is_some()).count()
    }

    pub fn occupancy(&self) -> f64 {
        self.occupied() as f64 / self.len() as f64
    }

    /// Combines two buffers over the same grid; the result does not depend
    /// on the merge order.
    pub fn merge(&mut self, other: &RasterGrid) -> Result<()> {
        if self.window != other.window || self.width != other.width || self.height != other.height {
            return Err(McfError::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        for i in 0..self.keys.len() {
            self.hits[i] = self.hits[i].saturating_add(other.hits[i]);
            self.keys[i] = self.keys[i].max(other.keys[i]);
        }
        Ok(())
    }

    /// RGB bytes, white where nothing was drawn.
    pub fn to_rgb(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(3 * self.len());
        for k in &self.keys {
            out.extend_from_slice(&match k {
                Some(k) => palette(k.branch),
                None => [255, 255, 255],
            });
        }
        out
    }

    /// Binary portable pixmap.
    pub fn to_p6(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_rgb());
        out
    }
}

const PALETTE: [[u8; 3]; 12] = [
    [228, 26, 28],
    [55, 126, 184],
    [77, 175, 74],
    [152, 78, 163],
    [255, 127, 0],
    [166, 86, 40],
    [247, 129, 191],
    [102, 102, 102],
    [23, 190, 207],
    [188, 189, 34],
    [31, 31, 120],
    [0, 0, 0],
];

/// Fixed color of a branch index.
pub fn palette(branch: u32) -> [u8; 3] {
    PALETTE[branch as usize % PALETTE.len()]
}

/// Places several equally sized rasters side by side in a grid of
/// `columns` columns, separated by a one-pixel grey gutter.
pub fn compose(panels: &[RasterGrid], columns: usize) -> (usize, usize, Vec<u8>) {
    if panels.is_empty() {
        return (0, 0, Vec::new());
    }
    let (w, h) = (panels[0].width, panels[0].height);
    let rows = panels.len().div_ceil(columns);
    let width = columns * w + columns - 1;
    let height = rows * h + rows - 1;
    let mut out = vec![160u8; 3 * width * height];
    for (k, p) in panels.iter().enumerate() {
        let (ox, oy) = ((k % columns) * (w + 1), (k / columns) * (h + 1));
        let rgb = p.to_rgb();
        for y in 0..h {
            let src = &rgb[3 * y * w..3 * (y + 1) * w];
            let start = 3 * ((oy + y) * width + ox);
            out[start..start + 3 * w].copy_from_slice(src);
        }
    }
    (width, height, out)
}

pub fn p6_bytes(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

fn plot_point(coords: PlotCoords, s: &OrbitSample, dual: bool) -> Result<[f64; 2]> {
    match (coords, dual) {
        (PlotCoords::Difference, true) => {
            let b = s.difference_coords();
            Ok([b[0], b[1]])
        }
        _ => simplex_embed(if dual { &s.a } else { &s.x }),
    }
}

/// Four rasters of `xₙ`, `aₙ`, `xₙ₊₁`, `aₙ₊₁`, each point colored by the
/// branch of step `n`.
pub fn render_panels(
    samples: &[OrbitSample],
    window: Window,
    resolution: usize,
    coords: PlotCoords,
) -> Result<[RasterGrid; 4]> {
    let blank = RasterGrid::new(window, resolution, resolution)?;
    let mut panels = [blank.clone(), blank.clone(), blank.clone(), blank];
    for pair in samples.windows(2) {
        let (s, t) = (&pair[0], &pair[1]);
        let key = PixelKey {
            class: 0,
            step: s.n,
            branch: s.branch.0 as u32,
        };
        panels[0].plot(plot_point(coords, s, false)?, key);
        panels[1].plot(plot_point(coords, s, true)?, key);
        panels[2].plot(plot_point(coords, t, false)?, key);
        panels[3].plot(plot_point(coords, t, true)?, key);
    }
    Ok(panels)
}

/// Parameters of [`render_fractal`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FractalParams {
    pub steps: u64,
    pub window: Window,
    pub resolution: usize,
    pub order: DrawOrder,
    pub coords: PlotCoords,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FractalImage {
    pub grid: RasterGrid,
    pub plotted: u64,
    pub warnings: Vec<String>,
}

/// Raster of the dual points `aₙ` of one orbit from a random start, for
/// `1 ≤ n ≤ steps`, each colored by the branch `M(xₙ₋₁)` that produced it.
pub fn render_fractal(spec: &AlgorithmSpec, params: &FractalParams) -> Result<FractalImage> {
    let mut grid = RasterGrid::new(params.window, params.resolution, params.resolution)?;
    let mut warnings = Vec::new();
    if params.coords == PlotCoords::Embed && !params.window.intersects(&embedding_range()) {
        warnings.push("window does not meet the embedded simplex; the image is empty".into());
        return Ok(FractalImage {
            grid,
            plotted: 0,
            warnings,
        });
    }
    let mut plotted = 0;
    let mut previous: Option<BranchId> = None;
    for s in orbit_cloud(spec, None, params.steps, params.seed)? {
        match s {
            Ok(s) => {
                if let Some(branch) = previous {
                    let key = PixelKey {
                        class: params.order.class(spec, branch),
                        step: s.n,
                        branch: branch.0 as u32,
                    };
                    grid.plot(plot_point(params.coords, &s, true)?, key);
                    plotted += 1;
                }
                previous = Some(s.branch);
            }
            Err(e) => warnings.push(format!("orbit stopped after {plotted} points: {e}")),
        }
    }
    Ok(FractalImage {
        grid,
        plotted,
        warnings,
    })
}

/// Pixel-set similarity between a raster and its rotation by 120°.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport {
    pub jaccard: f64,
    /// Jaccard index counting a pixel pair only when the colors agree after
    /// the coordinate 3-cycle is applied to the branch.
    pub colored_jaccard: Option<f64>,
    pub occupancy: f64,
    pub pixels_compared: usize,
}

impl SymmetryReport {
    pub fn to_text(&self) -> String {
        let colored = self
            .colored_jaccard
            .map_or("n/a".to_string(), |c| format!("{c:.6}"));
        format!(
            "jaccard={:.6}\ncolored_jaccard={colored}\noccupancy={:.6}\npixels_compared={}\n",
            self.jaccard, self.occupancy, self.pixels_compared
        )
    }
}

/// Compares each pixel `q` of the disc inscribed in the window with the
/// pixel containing `R⁻¹q`, `R` the rotation by 120° about the origin:
/// `J = |{q ∈ A : R⁻¹q ∈ A}| / |{q : q ∈ A or R⁻¹q ∈ A}|`.
/// With `spec`, branch colors are compared through the permutation of
/// coordinates that `R` induces on the simplex.
pub fn symmetry_probe(grid: &RasterGrid, spec: Option<&AlgorithmSpec>) -> Result<SymmetryReport> {
    symmetry_probe_within(grid, spec, 0)
}

/// [`symmetry_probe`] where a pixel also counts as matched when an occupied
/// pixel of the other set lies within `radius` pixels (Chebyshev distance).
pub fn symmetry_probe_within(
    grid: &RasterGrid,
    spec: Option<&AlgorithmSpec>,
    radius: usize,
) -> Result<SymmetryReport> {
    let w = grid.window();
    let half = 0.5 * (w.xmax - w.xmin);
    let centered =
        (w.xmin + w.xmax).abs() <= 1e-12 * half && (w.ymin + w.ymax).abs() <= 1e-12 * half;
    if grid.width() != grid.height()
        || (w.ymax - w.ymin - 2.0 * half).abs() > 1e-12 * half
        || !centered
    {
        return Err(McfError::Unsupported(
            "the symmetry probe needs a square raster centred on the origin".into(),
        ));
    }
    // R·embed(p₁, p₂, p₃) = embed(p₃, p₁, p₂)
    let color_map: Option<Vec<Option<u32>>> = spec.map(|s| {
        s.branch_ids()
            .map(|id| permuted_branch(s, id, &[2, 0, 1]).map(|b| b.0 as u32))
            .collect()
    });
    let permute = |b: u32| {
        color_map
            .as_ref()
            .and_then(|m| m.get(b as usize).copied().flatten())
    };
    let near = |index: usize, wanted: Option<u32>| -> (bool, bool) {
        let (px, py) = (
            (index % grid.width()) as isize,
            (index / grid.width()) as isize,
        );
        let r = radius as isize;
        let (mut any, mut same) = (false, false);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (px + dx, py + dy);
                if x < 0 || y < 0 || x >= grid.width() as isize || y >= grid.height() as isize {
                    continue;
                }
                if let Some(k) = grid.key(y as usize * grid.width() + x as usize) {
                    any = true;
                    same |= Some(k.branch) == wanted;
                }
            }
        }
        (any, same)
    };
    let (c, s) = (
        (2.0 * std::f64::consts::PI / 3.0).cos(),
        (2.0 * std::f64::consts::PI / 3.0).sin(),
    );
    let (mut matched, mut either, mut colored, mut compared) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..grid.len() {
        let q = grid.pixel_center(i);
        if q[0] * q[0] + q[1] * q[1] > half * half {
            continue;
        }
        compared += 1;
        let r = [c * q[0] + s * q[1], -s * q[0] + c * q[1]];
        let j = grid.pixel_of(r);
        let here = grid.key(i);
        let there = j.and_then(|j| grid.key(j));
        if here.is_none() && there.is_none() {
            continue;
        }
        either += 1;
        // each occupied side must find the other one nearby
        let (ok, ok_colored) = match (here, there) {
            (Some(h), Some(t)) if radius == 0 => (true, permute(t.branch) == Some(h.branch)),
            (Some(h), _) => {
                let (any, _) = j.map_or((false, false), |j| near(j, None));
                let colored = j.is_some_and(|j| {
                    let (px, py) = ((j % grid.width()) as isize, (j / grid.width()) as isize);
                    let r = radius as isize;
                    (-r..=r).any(|dy| {
                        (-r..=r).any(|dx| {
                            let (x, y) = (px + dx, py + dy);
                            x >= 0
                                && y >= 0
                                && x < grid.width() as isize
                                && y < grid.height() as isize
                                && grid
                                    .key(y as usize * grid.width() + x as usize)
                                    .is_some_and(|k| permute(k.branch) == Some(h.branch))
                        })
                    })
                });
                match there {
                    Some(t) => {
                        let (back, back_colored) = near(i, permute(t.branch));
                        (any && back, colored && back_colored)
                    }
                    None => (any, colored),
                }
            }
            (None, Some(t)) => near(i, permute(t.branch)),
            (None, None) => unreachable!(),
        };
        matched += usize::from(ok);
        colored += usize::from(ok && ok_colored);
    }
    let ratio = |n: usize| {
        if either == 0 {
            1.0
        } else {
            n as f64 / either as f64
        }
    };
    Ok(SymmetryReport {
        jaccard: ratio(matched),
        colored_jaccard: color_map.as_ref().map(|_| ratio(colored)),
        occupancy: grid.occupancy(),
        pixels_compared: compared,
    })
}

/// Fraction of the pixels whose centre satisfies `region` that are occupied,
/// with the number of such pixels.
pub fn region_occupancy(grid: &RasterGrid, region: impl Fn([f64; 2]) -> bool) -> (f64, usize) {
    let (mut total, mut hit) = (0usize, 0usize);
    for i in 0..grid.len() {
        if region(grid.pixel_center(i)) {
            total += 1;
            hit += usize::from(grid.key(i).is_some());
        }
    }
    (
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        },
        total,
    )
}

/// Branch containing `σ(x)` for `x` in branch `id`, where
/// `σ(x)ᵢ = x_{sigma[i]}`; `None` if the image straddles several branches.
pub fn permuted_branch(spec: &AlgorithmSpec, id: BranchId, sigma: &[usize]) -> Option<BranchId> {
    let rays = spec.cone(id).extreme_rays();
    let d = spec.dim();
    let mut interior = vec![0.0; d];
    for (k, r) in rays.iter().enumerate() {
        let weight = 1.0 + k as f64 * 0.137;
        for (v, c) in interior.iter_mut().zip(r) {
            *v += weight * c.to_string().parse::<f64>().unwrap_or(0.0);
        }
    }
    let permuted: Vec<f64> = sigma.iter().map(|&i| interior[i]).collect();
    spec.classify(&permuted).ok()
}

/// Orbit checks: among the samples taken after the first time `(xₙ, aₙ)`
/// enters the domain, the number outside it.
pub fn domain_violations_after_absorption(
    spec: &AlgorithmSpec,
    samples: impl Iterator<Item = Result<OrbitSample>>,
) -> Result<(Option<u64>, u64)> {
    let mut absorbed = None;
    let mut violations = 0;
    for s in samples {
        let s = s?;
        let state = NatExtState::new(ConeVector::new(s.x)?, ConeVector::new(s.a)?)?;
        let inside = crate::natext::state_in_domain(spec, &state)?;
        match (absorbed, inside) {
            (None, true) => absorbed = Some(s.n),
            (Some(_), false) => violations += 1,
            _ => {}
        }
    }
    Ok((absorbed, violations))
}

/// Renders several independent fractal orbits (seeds `seed..seed+count`)
/// in parallel and merges them.
pub fn render_fractal_many(
    spec: &AlgorithmSpec,
    params: &FractalParams,
    count: u64,
) -> Result<FractalImage> {
    let images: Vec<FractalImage> = (0..count)
        .into_par_iter()
        .map(|k| {
            render_fractal(
                spec,
                &FractalParams {
                    seed: params.seed + k,
                    ..*params
                },
            )
        })
        .collect::<Result<_>>()?;
    let mut iter = images.into_iter();
    let mut first = iter
        .next()
        .ok_or_else(|| McfError::Domain("no orbits".into()))?;
    for img in iter {
        first.grid.merge(&img.grid)?;
        first.plotted += img.plotted;
        first.warnings.extend(img.warnings);
    }
    Ok(first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::natext::dual_membership;
    use rand::Rng;

    fn spec(name: &str) -> AlgorithmSpec {
        AlgorithmSpec::from_name(name).unwrap()
    }

    #[test]
    fn embedding_examples() {
        let c = simplex_embed(&[1.0, 1.0, 1.0]).unwrap();
        assert!(c[0].abs() < 1e-15 && c[1].abs() < 1e-15);
        let vs: Vec<[f64; 2]> = (0..3)
            .map(|i| {
                let mut p = [0.0; 3];
                p[i] = 1.0;
                simplex_embed(&p).unwrap()
            })
            .collect();
        for (k, v) in vs.iter().enumerate() {
            assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-15);
            let w = vs[(k + 1) % 3];
            let cos = v[0] * w[0] + v[1] * w[1];
            assert!((cos + 0.5).abs() < 1e-15);
        }
        let m = simplex_embed(&[0.5, 0.5, 0.0]).unwrap();
        assert!((m[0] - 0.5 * (vs[0][0] + vs[1][0])).abs() < 1e-15);
        assert!((m[1] - 0.5 * (vs[0][1] + vs[1][1])).abs() < 1e-15);
        assert!(matches!(
            simplex_embed(&[0.5, 0.5]),
            Err(McfError::Unsupported(_))
        ));
        let p = [0.2, 0.3, 0.5];
        let back = simplex_unembed(simplex_embed(&p).unwrap());
        for (a, b) in back.iter().zip(p) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rotation_is_a_coordinate_cycle() {
        let p = [0.2, 0.3, 0.5];
        let q = simplex_embed(&p).unwrap();
        let (c, s) = (
            (2.0 * std::f64::consts::PI / 3.0).cos(),
            (2.0 * std::f64::consts::PI / 3.0).sin(),
        );
        let r = [c * q[0] - s * q[1], s * q[0] + c * q[1]];
        let expected = simplex_embed(&[p[2], p[0], p[1]]).unwrap();
        assert!((r[0] - expected[0]).abs() < 1e-15 && (r[1] - expected[1]).abs() < 1e-15);
    }

    #[test]
    fn orbit_of_length_zero_is_the_start() {
        let s = NatExtState::new(
            ConeVector::new(vec![0.125, 0.25, 0.625]).unwrap(),
            ConeVector::new(vec![1.0, 1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let samples: Vec<_> = orbit_cloud(&spec("reverse"), Some(&s), 0, 0)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].x, vec![0.125, 0.25, 0.625]);
        let samples: Vec<_> = orbit_cloud(&spec("reverse"), Some(&s), 10, 0)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(samples.len(), 11);
        assert_eq!(samples[10].n, 10);
    }

    #[test]
    fn orbits_are_reproducible() {
        let a: Vec<_> = orbit_cloud(&spec("arp"), None, 1000, 5).unwrap().collect();
        let b: Vec<_> = orbit_cloud(&spec("arp"), None, 1000, 5).unwrap().collect();
        assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(u.as_ref().unwrap(), v.as_ref().unwrap());
        }
    }

    #[test]
    fn boundary_hit_truncates_the_stream() {
        let s = NatExtState::new(
            ConeVector::new(vec![0.25, 0.25, 0.5]).unwrap(),
            ConeVector::new(vec![1.0, 1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let items: Vec<_> = orbit_cloud(&spec("brun"), Some(&s), 5, 0)
            .unwrap()
            .collect();
        assert_eq!(items.len(), 1);
        assert!(matches!(items[0], Err(McfError::Boundary(_))));
    }

    #[test]
    fn reverse_dual_points_stay_in_the_triangle_inequality_cone() {
        for name in ["reverse", "cassaigne", "brun"] {
            let s = spec(name);
            let (absorbed, violations) =
                domain_violations_after_absorption(&s, orbit_cloud(&s, None, 100_000, 3).unwrap())
                    .unwrap();
            assert!(absorbed.is_some(), "{name}");
            assert_eq!(violations, 0, "{name}");
        }
    }

    #[test]
    fn brun_dual_points_lie_in_theta_star_of_their_branch() {
        let s = spec("brun");
        let mut samples = orbit_cloud(&s, None, 100_000, 4)
            .unwrap()
            .map(|r| r.unwrap());
        let first_inside = samples
            .by_ref()
            .find(|x| {
                let a = ConeVector::new(x.a.clone()).unwrap();
                dual_membership(&s, &a).unwrap().sources.contains(&x.branch)
            })
            .is_some();
        assert!(first_inside);
        for x in samples {
            let a = ConeVector::new(x.a.clone()).unwrap();
            assert!(dual_membership(&s, &a).unwrap().sources.contains(&x.branch));
        }
    }

    #[test]
    fn draw_order_priorities() {
        let arp = spec("arp");
        let window = Window::centered(1.0).unwrap();
        let mut g = RasterGrid::new(window, 4, 4).unwrap();
        let ar = PixelKey {
            class: DrawOrder::PoincareLast.class(&arp, BranchId(0)),
            step: 10,
            branch: 0,
        };
        let p = PixelKey {
            class: DrawOrder::PoincareLast.class(&arp, BranchId(4)),
            step: 1,
            branch: 4,
        };
        g.plot([0.1, 0.1], p);
        g.plot([0.1, 0.1], ar);
        let i = g.pixel_of([0.1, 0.1]).unwrap();
        assert_eq!(g.key(i).unwrap().branch, 4);
        assert_eq!(g.hits(i), 2);
        let mut h = RasterGrid::new(window, 4, 4).unwrap();
        h.plot([0.1, 0.1], ar);
        let mut merged = h.clone();
        merged.merge(&g).unwrap();
        let mut other = g.clone();
        other.merge(&h).unwrap();
        assert_eq!(merged, other);
    }

    #[test]
    fn empty_panels_are_white() {
        let panels =
            render_panels(&[], Window::centered(1.0).unwrap(), 8, PlotCoords::Embed).unwrap();
        for p in &panels {
            assert_eq!(p.occupied(), 0);
            assert!(p.to_rgb().iter().all(|&b| b == 255));
        }
        let p6 = panels[0].to_p6();
        assert!(p6.starts_with(b"P6\n8 8\n255\n"));
        assert_eq!(p6.len(), 11 + 3 * 64);
    }

    #[test]
    fn reverse_dual_panel_lies_in_the_central_triangle() {
        let s = spec("reverse");
        let samples: Vec<OrbitSample> = orbit_cloud(&s, None, 20_000, 8)
            .unwrap()
            .map(|r| r.unwrap())
            .skip(100)
            .collect();
        let panels = render_panels(
            &samples,
            Window::centered(1.0).unwrap(),
            128,
            PlotCoords::Embed,
        )
        .unwrap();
        for i in 0..panels[1].len() {
            if panels[1].key(i).is_some() {
                let b = simplex_unembed(panels[1].pixel_center(i));
                assert!(b.iter().all(|&c| c < 0.5 + 0.02), "{b:?}");
            }
        }
    }

    #[test]
    fn symmetry_of_synthetic_rasters() {
        let w = Window::centered(1.0).unwrap();
        let mut full = RasterGrid::new(w, 64, 64).unwrap();
        for i in 0..full.len() {
            let q = full.pixel_center(i);
            full.plot(
                q,
                PixelKey {
                    class: 0,
                    step: 0,
                    branch: 0,
                },
            );
        }
        assert_eq!(symmetry_probe(&full, None).unwrap().jaccard, 1.0);
        let mut disc = RasterGrid::new(w, 256, 256).unwrap();
        for i in 0..disc.len() {
            let q = disc.pixel_center(i);
            if q[0].hypot(q[1]) < 0.7 {
                disc.plot(
                    q,
                    PixelKey {
                        class: 0,
                        step: 0,
                        branch: 0,
                    },
                );
            }
        }
        assert!(symmetry_probe(&disc, None).unwrap().jaccard > 0.99);
        let mut half = RasterGrid::new(w, 256, 256).unwrap();
        for i in 0..half.len() {
            let q = half.pixel_center(i);
            if q[0] > 0.0 {
                half.plot(
                    q,
                    PixelKey {
                        class: 0,
                        step: 0,
                        branch: 0,
                    },
                );
            }
        }
        let j = symmetry_probe(&half, None).unwrap().jaccard;
        // a half plane meets its 120° rotation in a sixth of the disc
        assert!((j - 0.2).abs() < 0.02, "{j}");
        assert!(symmetry_probe(&RasterGrid::new(w, 4, 8).unwrap(), None).is_err());
        let off = Window::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(symmetry_probe(&RasterGrid::new(off, 8, 8).unwrap(), None).is_err());
    }

    #[test]
    fn noise_raster_scores_its_analytic_expectation() {
        let w = Window::centered(1.0).unwrap();
        let mut g = RasterGrid::new(w, 256, 256).unwrap();
        let mut rng = seeded_rng(1, 0);
        let p = 0.3;
        for i in 0..g.len() {
            if rng.random::<f64>() < p {
                let q = g.pixel_center(i);
                g.plot(
                    q,
                    PixelKey {
                        class: 0,
                        step: 0,
                        branch: 0,
                    },
                );
            }
        }
        let j = symmetry_probe(&g, None).unwrap().jaccard;
        assert!((j - p / (2.0 - p)).abs() < 0.01, "{j}");
    }

    #[test]
    fn arp_branches_permute_under_the_coordinate_cycle() {
        let arp = spec("arp");
        let images: Vec<_> = arp
            .branch_ids()
            .map(|id| permuted_branch(&arp, id, &[2, 0, 1]).map(|b| arp.label(b).to_string()))
            .collect();
        assert!(images.iter().all(Option::is_some));
        let mut sorted: Vec<_> = images.iter().flatten().cloned().collect();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 9);
        assert_eq!(images[0].as_deref(), Some("AR2"));
    }

    #[test]
    fn fractal_is_reproducible_and_window_checked() {
        let arp = spec("arp");
        let params = FractalParams {
            steps: 20_000,
            window: Window::centered(0.6).unwrap(),
            resolution: 64,
            order: DrawOrder::PoincareLast,
            coords: PlotCoords::Embed,
            seed: 1,
        };
        let a = render_fractal(&arp, &params).unwrap();
        let b = render_fractal(&arp, &params).unwrap();
        assert_eq!(a.grid.to_p6(), b.grid.to_p6());
        assert_eq!(a.plotted, 20_000);
        let far = FractalParams {
            window: Window::new(5.0, 6.0, 5.0, 6.0).unwrap(),
            ..params
        };
        let img = render_fractal(&arp, &far).unwrap();
        assert_eq!(img.grid.occupied(), 0);
        assert_eq!(img.warnings.len(), 1);
    }

    #[test]
    fn p6_round_trip() {
        let w = Window::centered(1.0).unwrap();
        let mut g = RasterGrid::new(w, 5, 3).unwrap();
        g.plot(
            [0.1, 0.1],
            PixelKey {
                class: 0,
                step: 0,
                branch: 3,
            },
        );
        g.plot(
            [-0.9, -0.9],
            PixelKey {
                class: 0,
                step: 0,
                branch: 0,
            },
        );
        let back = RasterGrid::from_p6(w, &g.to_p6()).unwrap();
        assert_eq!(back.to_p6(), g.to_p6());
        assert_eq!(back.occupied(), 2);
        assert!(RasterGrid::from_p6(w, b"P5\n1 1\n255\n\0").is_err());
        assert!(RasterGrid::from_p6(w, b"P6\n2 2\n255\n\0\0\0").is_err());
    }

    #[test]
    fn tolerant_probe_bounds_the_strict_one() {
        let w = Window::centered(1.0).unwrap();
        let mut g = RasterGrid::new(w, 128, 128).unwrap();
        let mut rng = seeded_rng(2, 0);
        for i in 0..g.len() {
            if rng.random::<f64>() < 0.2 {
                let q = g.pixel_center(i);
                g.plot(
                    q,
                    PixelKey {
                        class: 0,
                        step: 0,
                        branch: 0,
                    },
                );
            }
        }
        let strict = symmetry_probe(&g, None).unwrap().jaccard;
        let loose = symmetry_probe_within(&g, None, 1).unwrap().jaccard;
        assert!(loose > strict);
        // each side finds one of nine neighbours occupied
        let p: f64 = 1.0 - 0.8f64.powi(9);
        assert!((loose - p).abs() < 0.05, "{loose} {p}");
    }

    #[test]
    fn difference_coordinates() {
        let s = OrbitSample {
            n: 0,
            branch: BranchId(0),
            x: vec![0.2, 0.3, 0.5],
            a: vec![0.5, 0.3, 0.2],
        };
        let e = 0.1 + 0.09 + 0.1;
        let b = s.difference_coords();
        assert!((b[0] - 0.3 / e).abs() < 1e-15 && (b[1] - 0.1 / e).abs() < 1e-15);
    }
}
