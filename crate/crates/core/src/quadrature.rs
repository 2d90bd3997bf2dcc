//! Cell grids on domains and quadrature of singular double integrals
//! `∬ g(x, y) / |x − y|^{n+β} dx dy`.
//!
//! Far cell pairs use the midpoint rule between cell centers. Pairs of cells
//! whose lattice indices differ by at most one in every coordinate are refined
//! recursively: touching sub-cells are split `2ⁿ`-fold down to depth `L`, where
//! only the coincident sub-pairs are dropped. The refinement pattern depends only
//! on the index offset of the two cells, so it is precomputed once per offset.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Isometry};
use crate::vecops::{dist, ordered_map, tree_reduce, tree_sum, CompensatedSum};

/// Cells per side of a far-field tile.
pub const TILE: usize = 64;
/// Cells of `grid_x` per near-field batch.
pub const NEAR_BLOCK: usize = 16;
/// Monte-Carlo strata per axis for the volume of clipped cells.
const MC_STRATA: usize = 32;
const MC_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn default_depth(n: usize) -> usize {
    match n {
        0..=2 => 4,
        3 => 2,
        _ => 1,
    }
}

/// Sub-cell centers of one lattice cell across refinement levels `0..=L`.
#[derive(Debug)]
struct NodeLayout {
    /// Offsets in units of `h`, `n` per node.
    offsets: Vec<f64>,
    level: Vec<u8>,
    /// First node id of each level.
    level_start: Vec<usize>,
}

impl NodeLayout {
    fn new(n: usize, depth: usize) -> Self {
        let mut offsets = Vec::new();
        let mut level = Vec::new();
        let mut level_start = Vec::new();
        for l in 0..=depth {
            level_start.push(level.len());
            let side = 1usize << l;
            let count = side.pow(n as u32);
            for mut r in 0..count {
                for _ in 0..n {
                    let i = r % side;
                    r /= side;
                    offsets.push((i as f64 + 0.5) / side as f64);
                }
                level.push(l as u8);
            }
        }
        NodeLayout { offsets, level, level_start }
    }

    fn len(&self) -> usize {
        self.level.len()
    }

    fn id(&self, n: usize, l: usize, pos: &[i64]) -> usize {
        let side = 1i64 << l;
        let mut r = 0i64;
        for d in (0..n).rev() {
            r = r * side + pos[d];
        }
        self.level_start[l] + r as usize
    }
}

/// Node pairs `(a, b, level)` for one cell offset.
#[derive(Debug)]
struct Stencil {
    offset: Vec<i64>,
    entries: Vec<(u16, u16, u8)>,
}

fn build_stencil(n: usize, depth: usize, layout: &NodeLayout, offset: &[i64]) -> Stencil {
    let mut entries = Vec::new();
    let root = vec![0i64; n];
    recurse_stencil(n, depth, layout, offset, 0, &root, &root, &mut entries);
    Stencil { offset: offset.to_vec(), entries }
}

#[allow(clippy::too_many_arguments)]
fn recurse_stencil(
    n: usize,
    depth: usize,
    layout: &NodeLayout,
    offset: &[i64],
    l: usize,
    pa: &[i64],
    pb: &[i64],
    out: &mut Vec<(u16, u16, u8)>,
) {
    let side = 1i64 << l;
    let touching = (0..n).all(|d| (offset[d] * side + pb[d] - pa[d]).abs() <= 1);
    let coincident = (0..n).all(|d| offset[d] * side + pb[d] - pa[d] == 0);
    if !touching || l == depth {
        if !coincident {
            out.push((layout.id(n, l, pa) as u16, layout.id(n, l, pb) as u16, l as u8));
        }
        return;
    }
    let children = 1usize << n;
    let mut ca = vec![0i64; n];
    let mut cb = vec![0i64; n];
    for i in 0..children {
        for d in 0..n {
            ca[d] = 2 * pa[d] + (i >> d & 1) as i64;
        }
        for j in 0..children {
            for d in 0..n {
                cb[d] = 2 * pb[d] + (j >> d & 1) as i64;
            }
            recurse_stencil(n, depth, layout, offset, l + 1, &ca, &cb, out);
        }
    }
}

#[derive(Debug)]
struct Stencils {
    layout: NodeLayout,
    /// All `3ⁿ` offsets in lexicographic order.
    stencils: Vec<Stencil>,
}

impl Stencils {
    fn new(n: usize, depth: usize) -> Self {
        let layout = NodeLayout::new(n, depth);
        let count = 3usize.pow(n as u32);
        let stencils = (0..count)
            .map(|mut r| {
                let mut o = vec![0i64; n];
                for d in (0..n).rev() {
                    o[d] = (r % 3) as i64 - 1;
                    r /= 3;
                }
                build_stencil(n, depth, &layout, &o)
            })
            .collect();
        Stencils { layout, stencils }
    }
}

fn lex_nonnegative(o: &[i64]) -> bool {
    for &v in o {
        if v != 0 {
            return v > 0;
        }
    }
    true
}

/// A lattice of cells of side `h` (anchored at the origin of the local frame)
/// covering a domain; clipped boundary cells carry Monte-Carlo volumes.
#[derive(Clone)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub depth: usize,
    /// Local-to-world isometry.
    pub frame: Isometry,
    /// The domain in local coordinates.
    pub domain: Domain,
    idx: Vec<i64>,
    centers: Vec<f64>,
    volumes: Vec<f64>,
    partial: Vec<bool>,
    /// Node masks of clipped cells (node inside the domain).
    masks: HashMap<usize, Vec<bool>>,
    lookup: HashMap<Vec<i64>, u32>,
    stencils: Arc<Stencils>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("depth", &self.depth)
            .field("cells", &self.len())
            .finish()
    }
}

/// Grid on `domain` with spacing `h`, identity frame and the default depth.
pub fn make_grid(domain: &Domain, h: f64) -> Result<Grid> {
    Grid::new(domain, h, Isometry::identity(domain.dim()), default_depth(domain.dim()))
}

impl Grid {
    pub fn new(domain: &Domain, h: f64, frame: Isometry, depth: usize) -> Result<Self> {
        let n = domain.dim();
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Parameter(format!("grid spacing must be positive, got {h}")));
        }
        if frame.n != n {
            return Err(Error::InvalidInput("frame dimension differs from domain".into()));
        }
        if depth > 8 || (n as u32) * (depth as u32) > 16 {
            return Err(Error::Parameter(format!("refinement depth {depth} too large for n = {n}")));
        }
        let bb = domain.bounding_box();
        let mut lo_i = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        for d in 0..n {
            let extent = bb.hi[d] - bb.lo[d];
            if extent / h < 4.0 - 1e-9 {
                return Err(Error::Resolution(format!(
                    "axis {d}: extent {extent} holds fewer than 4 cells of size {h}"
                )));
            }
            let a = (bb.lo[d] / h + 1e-9).floor() as i64;
            let b = (bb.hi[d] / h - 1e-9).ceil() as i64;
            lo_i.push(a);
            counts.push((b - a) as usize);
        }
        let stencils = Arc::new(Stencils::new(n, depth));
        let layout = &stencils.layout;
        let probe: Vec<f64> = {
            // interior probe points on a 5ⁿ lattice
            let m = 5usize;
            let mut v = Vec::new();
            for mut r in 0..m.pow(n as u32) {
                for _ in 0..n {
                    v.push(((r % m) as f64 + 0.5) / m as f64);
                    r /= m;
                }
            }
            v
        };

        let total: usize = counts.iter().product();
        let mut idx = Vec::new();
        let mut centers = Vec::new();
        let mut volumes = Vec::new();
        let mut partial = Vec::new();
        let mut masks = HashMap::new();
        let mut lookup = HashMap::new();
        let mut cell = vec![0i64; n];
        let mut x = vec![0.0; n];
        for lin in 0..total {
            let mut r = lin;
            for d in 0..n {
                cell[d] = lo_i[d] + (r % counts[d]) as i64;
                r /= counts[d];
            }
            let inside_at = |off: &[f64], x: &mut [f64]| {
                for d in 0..n {
                    x[d] = (cell[d] as f64 + off[d]) * h;
                }
                domain.contains(x)
            };
            let mask: Vec<bool> = (0..layout.len())
                .map(|k| inside_at(&layout.offsets[k * n..(k + 1) * n], &mut x))
                .collect();
            let probes_in = probe.chunks(n).filter(|off| inside_at(off, &mut x)).count();
            let full = probes_in == probe.len() / n && mask.iter().all(|&b| b);
            if full {
                let local: Vec<f64> = (0..n).map(|d| (cell[d] as f64 + 0.5) * h).collect();
                push_cell(&mut idx, &mut centers, &mut volumes, &mut partial, &cell, &frame.apply(&local), h.powi(n as i32), false);
            } else {
                let (vol, centroid) = mc_volume(domain, &cell, h, n);
                if vol <= 0.0 {
                    continue;
                }
                masks.insert(volumes.len(), mask);
                push_cell(&mut idx, &mut centers, &mut volumes, &mut partial, &cell, &frame.apply(&centroid), vol, true);
            }
            lookup.insert(cell.clone(), (volumes.len() - 1) as u32);
        }
        if volumes.is_empty() {
            return Err(Error::Resolution("grid has no cells inside the domain".into()));
        }
        Ok(Grid {
            n,
            h,
            depth,
            frame,
            domain: domain.clone(),
            idx,
            centers,
            volumes,
            partial,
            masks,
            lookup,
            stencils,
        })
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        tree_sum(self.volumes.clone())
    }

    /// World-space center (centroid for clipped cells).
    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.n..(i + 1) * self.n]
    }

    pub fn volume(&self, i: usize) -> f64 {
        self.volumes[i]
    }

    pub fn is_partial(&self, i: usize) -> bool {
        self.partial[i]
    }

    pub fn lattice_index(&self, i: usize) -> &[i64] {
        &self.idx[i * self.n..(i + 1) * self.n]
    }

    /// Number of quadrature nodes per cell.
    pub fn nodes_per_cell(&self) -> usize {
        self.stencils.layout.len()
    }

    /// World position of node `k` of cell `i`.
    pub fn node(&self, i: usize, k: usize, out: &mut [f64]) {
        let n = self.n;
        let off = &self.stencils.layout.offsets[k * n..(k + 1) * n];
        let local: Vec<f64> = (0..n).map(|d| (self.idx[i * n + d] as f64 + off[d]) * self.h).collect();
        self.frame.apply_into(&local, out);
    }

    /// Whether node `k` of cell `i` lies inside the domain.
    pub fn node_active(&self, i: usize, k: usize) -> bool {
        self.masks.get(&i).is_none_or(|m| m[k])
    }

    fn compatible(&self, other: &Grid) -> bool {
        self.n == other.n && self.h == other.h && self.depth == other.depth && self.frame == other.frame
    }

    fn fingerprint(&self) -> (usize, Vec<i64>, u64) {
        let vb = self.volumes.iter().fold(0u64, |acc, v| acc.rotate_left(5) ^ v.to_bits());
        (self.len(), self.idx.iter().take(4 * self.n).copied().collect(), vb)
    }

    fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other)
            || (self.compatible(other) && self.idx == other.idx && self.volumes == other.volumes && self.centers == other.centers)
    }
}

#[allow(clippy::too_many_arguments)]
fn push_cell(
    idx: &mut Vec<i64>,
    centers: &mut Vec<f64>,
    volumes: &mut Vec<f64>,
    partial: &mut Vec<bool>,
    cell: &[i64],
    center: &[f64],
    vol: f64,
    is_partial: bool,
) {
    idx.extend_from_slice(cell);
    centers.extend_from_slice(center);
    volumes.push(vol);
    partial.push(is_partial);
}

/// Stratified Monte-Carlo volume and centroid (local frame) of a clipped cell.
fn mc_volume(domain: &Domain, cell: &[i64], h: f64, n: usize) -> (f64, Vec<f64>) {
    let mut seed = MC_SEED;
    for &c in cell {
        seed = seed.rotate_left(17) ^ (c as u64).wrapping_mul(0xff51_afd7_ed55_8ccd);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata = if n <= 2 { MC_STRATA } else { 10 };
    let total = strata.pow(n as u32);
    let mut hits = 0usize;
    let mut sum = vec![0.0; n];
    let mut x = vec![0.0; n];
    for mut r in 0..total {
        for d in 0..n {
            let s = r % strata;
            r /= strata;
            let u: f64 = rng.random();
            x[d] = (cell[d] as f64 + (s as f64 + u) / strata as f64) * h;
        }
        if domain.contains(&x) {
            hits += 1;
            for d in 0..n {
                sum[d] += x[d];
            }
        }
    }
    if hits == 0 {
        return (0.0, Vec::new());
    }
    let vol = h.powi(n as i32) * hits as f64 / total as f64;
    (vol, sum.iter().map(|s| s / hits as f64).collect())
}

/// One evaluated pair: node indices into the batch's `xs`/`ys`, the quadrature
/// weight (symmetry factor included) and the distance `|x − y|`.
#[derive(Clone, Copy, Debug)]
pub struct Pair {
    pub ix: u32,
    pub iy: u32,
    pub w: f64,
    pub d: f64,
}

/// A chunk of the pair sum with its own node coordinate arrays.
#[derive(Debug, Default)]
pub struct PairBatch {
    pub n: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub pairs: Vec<Pair>,
}

impl PairBatch {
    pub fn x(&self, i: u32) -> &[f64] {
        &self.xs[i as usize * self.n..(i as usize + 1) * self.n]
    }

    pub fn y(&self, i: u32) -> &[f64] {
        &self.ys[i as usize * self.n..(i as usize + 1) * self.n]
    }

    pub fn x_len(&self) -> usize {
        self.xs.len() / self.n.max(1)
    }

    pub fn y_len(&self) -> usize {
        self.ys.len() / self.n.max(1)
    }
}

#[derive(Clone, Copy, Debug)]
enum Task {
    Far { i: usize, j: usize },
    Near { block: usize },
}

/// The pair sum over `grid_x × grid_y` split into deterministic batches.
pub struct PairPlan<'a> {
    gx: &'a Grid,
    gy: &'a Grid,
    symmetric: bool,
    tasks: Vec<Task>,
}

impl<'a> PairPlan<'a> {
    /// `symmetric` requests the halved sum over identical grids; it is ignored
    /// when the grids differ.
    pub fn new(gx: &'a Grid, gy: &'a Grid, symmetric: bool) -> Result<Self> {
        if !gx.compatible(gy) {
            return Err(Error::InvalidInput(
                "double integrals need grids on the same lattice (n, h, depth, frame)".into(),
            ));
        }
        let symmetric = symmetric && gx.same_as(gy);
        let tx = gx.len().div_ceil(TILE);
        let ty = gy.len().div_ceil(TILE);
        let mut tasks = Vec::new();
        for i in 0..tx {
            for j in 0..ty {
                if !symmetric || i <= j {
                    tasks.push(Task::Far { i, j });
                }
            }
        }
        for block in 0..gx.len().div_ceil(NEAR_BLOCK) {
            tasks.push(Task::Near { block });
        }
        Ok(PairPlan { gx, gy, symmetric, tasks })
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn batches(&self) -> usize {
        self.tasks.len()
    }

    /// Build batch `t`.
    pub fn batch(&self, t: usize) -> PairBatch {
        match self.tasks[t] {
            Task::Far { i, j } => self.far_batch(i, j),
            Task::Near { block } => self.near_batch(block),
        }
    }

    /// Apply `f` to every batch; results come back in batch order for any
    /// thread count.
    pub fn map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&PairBatch) -> Result<T> + Sync + Send,
    {
        let ids: Vec<usize> = (0..self.tasks.len()).collect();
        ordered_map(&ids, |&t| f(&self.batch(t))).into_iter().collect()
    }

    fn is_near(&self, a: usize, b: usize) -> bool {
        let n = self.gx.n;
        let ia = self.gx.lattice_index(a);
        let ib = self.gy.lattice_index(b);
        (0..n).all(|d| (ia[d] - ib[d]).abs() <= 1)
    }

    fn far_batch(&self, ti: usize, tj: usize) -> PairBatch {
        let (gx, gy, n) = (self.gx, self.gy, self.gx.n);
        let ra = ti * TILE..((ti + 1) * TILE).min(gx.len());
        let rb = tj * TILE..((tj + 1) * TILE).min(gy.len());
        let mut batch = PairBatch { n, ..Default::default() };
        for a in ra.clone() {
            batch.xs.extend_from_slice(gx.center(a));
        }
        for b in rb.clone() {
            batch.ys.extend_from_slice(gy.center(b));
        }
        let diag = self.symmetric && ti == tj;
        let factor = if self.symmetric { 2.0 } else { 1.0 };
        for (la, a) in ra.clone().enumerate() {
            for (lb, b) in rb.clone().enumerate() {
                if diag && b <= a {
                    continue;
                }
                if self.is_near(a, b) {
                    continue;
                }
                let w = factor * gx.volume(a) * gy.volume(b);
                let d = dist(gx.center(a), gy.center(b));
                batch.pairs.push(Pair { ix: la as u32, iy: lb as u32, w, d });
            }
        }
        batch
    }

    fn near_batch(&self, block: usize) -> PairBatch {
        let (gx, gy, n) = (self.gx, self.gy, self.gx.n);
        let st = &gx.stencils;
        let nn = st.layout.len();
        let hn = gx.h.powi(n as i32);
        let level_w: Vec<f64> = (0..=gx.depth)
            .map(|l| {
                let v = hn / (1u64 << (n * l)) as f64;
                v * v
            })
            .collect();
        let cells = block * NEAR_BLOCK..((block + 1) * NEAR_BLOCK).min(gx.len());
        let mut batch = PairBatch { n, ..Default::default() };
        let mut slot_of: HashMap<usize, usize> = HashMap::new();
        let mut y_cells: Vec<usize> = Vec::new();
        let mut work: Vec<(usize, usize, usize, f64)> = Vec::new(); // (local a, slot b, stencil, factor)
        let mut key = vec![0i64; n];
        for (la, a) in cells.clone().enumerate() {
            let ia = gx.lattice_index(a);
            for (si, s) in st.stencils.iter().enumerate() {
                let factor = if self.symmetric {
                    if s.offset.iter().all(|&v| v == 0) {
                        1.0
                    } else if lex_nonnegative(&s.offset) {
                        2.0
                    } else {
                        continue;
                    }
                } else {
                    1.0
                };
                for d in 0..n {
                    key[d] = ia[d] + s.offset[d];
                }
                if let Some(&b) = gy.lookup.get(&key) {
                    let b = b as usize;
                    let slot = *slot_of.entry(b).or_insert_with(|| {
                        y_cells.push(b);
                        y_cells.len() - 1
                    });
                    work.push((la, slot, si, factor));
                }
            }
        }
        let mut p = vec![0.0; n];
        for a in cells.clone() {
            for k in 0..nn {
                gx.node(a, k, &mut p);
                batch.xs.extend_from_slice(&p);
            }
        }
        for &b in &y_cells {
            for k in 0..nn {
                gy.node(b, k, &mut p);
                batch.ys.extend_from_slice(&p);
            }
        }
        let base = cells.start;
        for (la, slot, si, factor) in work {
            let a = base + la;
            let b = y_cells[slot];
            let ma = gx.masks.get(&a);
            let mb = gy.masks.get(&b);
            for &(na, nb, l) in &st.stencils[si].entries {
                let (na, nb) = (na as usize, nb as usize);
                if ma.is_some_and(|m| !m[na]) || mb.is_some_and(|m| !m[nb]) {
                    continue;
                }
                let ix = (la * nn + na) as u32;
                let iy = (slot * nn + nb) as u32;
                let d = dist(batch.x(ix), batch.y(iy));
                batch.pairs.push(Pair { ix, iy, w: factor * level_w[l as usize], d });
            }
        }
        batch
    }
}

/// Integrand of a pair sum with cached per-node data.
pub trait PairKernel: Sync {
    /// Number of cached values per node.
    fn node_dim(&self) -> usize;

    /// Cache the node data (usually field values) at `x`.
    fn prepare(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Full integrand value, kernel included, for a pair at distance `d`.
    fn pair(&self, x: &[f64], vx: &[f64], y: &[f64], vy: &[f64], d: f64) -> f64;

    /// `pair(x, y) = pair(y, x)` for every pair.
    fn symmetric(&self) -> bool {
        true
    }
}

/// Cache the kernel's node data for the batch.
pub fn prepare_nodes<K: PairKernel + ?Sized>(k: &K, batch: &PairBatch) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = k.node_dim();
    let mut vx = vec![0.0; batch.x_len() * m];
    let mut vy = vec![0.0; batch.y_len() * m];
    for i in 0..batch.x_len() {
        k.prepare(batch.x(i as u32), &mut vx[i * m..(i + 1) * m])?;
    }
    for i in 0..batch.y_len() {
        k.prepare(batch.y(i as u32), &mut vy[i * m..(i + 1) * m])?;
    }
    Ok((vx, vy))
}

/// `∬ integrand` over `grid_x × grid_y`, deterministic for any thread count.
pub fn integrate_pairs<K: PairKernel + ?Sized>(gx: &Grid, gy: &Grid, k: &K) -> Result<f64> {
    // canonical order so that swapping the grids of a symmetric integrand
    // reproduces the same summation tree
    let (gx, gy) = if k.symmetric() && !gx.same_as(gy) && gx.fingerprint() > gy.fingerprint() {
        (gy, gx)
    } else {
        (gx, gy)
    };
    let plan = PairPlan::new(gx, gy, k.symmetric())?;
    let m = k.node_dim();
    let partials = plan.map(|batch| {
        let (vx, vy) = prepare_nodes(k, batch)?;
        let mut acc = CompensatedSum::default();
        for p in &batch.pairs {
            let (x, y) = (batch.x(p.ix), batch.y(p.iy));
            let (i, j) = (p.ix as usize, p.iy as usize);
            let v = k.pair(x, &vx[i * m..(i + 1) * m], y, &vy[j * m..(j + 1) * m], p.d);
            if !v.is_finite() {
                return Err(Error::NonFinite { x: x.to_vec(), y: y.to_vec() });
            }
            acc.add(p.w * v);
        }
        Ok(acc.value())
    })?;
    Ok(tree_sum(partials))
}

/// `∫ f(x) dx` by the cell-weighted rule over cell centers.
pub fn integrate_cells<F>(grid: &Grid, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    let chunks: Vec<usize> = (0..grid.len().div_ceil(256)).collect();
    let partials: Result<Vec<f64>> = ordered_map(&chunks, |&c| {
        let mut acc = CompensatedSum::default();
        for i in c * 256..((c + 1) * 256).min(grid.len()) {
            let v = f(grid.center(i))?;
            if !v.is_finite() {
                return Err(Error::NonFinite { x: grid.center(i).to_vec(), y: Vec::new() });
            }
            acc.add(grid.volume(i) * v);
        }
        Ok(acc.value())
    })
    .into_iter()
    .collect();
    Ok(tree_sum(partials?))
}

type Numerator = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// `g(x, y) / |x − y|^{n+β}` for a plain numerator callback.
pub struct PairKernelSpec {
    pub beta: f64,
    pub numerator: Box<Numerator>,
    pub symmetric: bool,
}

impl PairKernelSpec {
    pub fn new<G>(beta: f64, g: G) -> Self
    where
        G: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        PairKernelSpec { beta, numerator: Box::new(g), symmetric: true }
    }

    pub fn asymmetric(mut self) -> Self {
        self.symmetric = false;
        self
    }
}

struct SpecKernel<'a> {
    spec: &'a PairKernelSpec,
    exponent: f64,
}

impl PairKernel for SpecKernel<'_> {
    fn node_dim(&self) -> usize {
        0
    }

    fn prepare(&self, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Ok(())
    }

    fn pair(&self, x: &[f64], _: &[f64], y: &[f64], _: &[f64], d: f64) -> f64 {
        (self.spec.numerator)(x, y) / d.powf(self.exponent)
    }

    fn symmetric(&self) -> bool {
        self.spec.symmetric
    }
}

/// `∬ g(x, y) / |x − y|^{n+β} dx dy` over `grid_x × grid_y`.
pub fn double_integral(gx: &Grid, gy: &Grid, spec: &PairKernelSpec) -> Result<f64> {
    let k = SpecKernel { spec, exponent: gx.n as f64 + spec.beta };
    integrate_pairs(gx, gy, &k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Empirical order from the last three values.
    pub order: f64,
    /// Least-squares order over all consecutive differences.
    pub fitted_order: f64,
    pub extrapolate: f64,
    pub monotone: bool,
}

/// Evaluate `compute(h)` over a geometrically decreasing sequence and report the
/// empirical order and the Richardson extrapolate.
pub fn convergence_study<F>(hs: &[f64], mut compute: F) -> Result<ConvergenceTable>
where
    F: FnMut(f64) -> Result<f64>,
{
    if hs.len() < 3 {
        return Err(Error::InvalidInput("convergence study needs at least three grid sizes".into()));
    }
    let r = hs[0] / hs[1];
    for w in hs.windows(2) {
        if !(w[1] < w[0]) || ((w[0] / w[1]) - r).abs() > 1e-9 * r {
            return Err(Error::InvalidInput("grid sizes must decrease geometrically".into()));
        }
    }
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        rows.push(ConvergenceRow { h, value: compute(h)? });
    }
    let v: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let k = v.len();
    let (d1, d2) = (v[k - 2] - v[k - 3], v[k - 1] - v[k - 2]);
    let order = if d2 == 0.0 { f64::INFINITY } else { (d1 / d2).abs().ln() / r.ln() };
    let extrapolate = if order.is_finite() && order > 0.0 {
        v[k - 1] + d2 / (r.powf(order) - 1.0)
    } else {
        v[k - 1]
    };
    let diffs: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let fitted_order = if diffs.iter().all(|&d| d > 0.0) {
        let xs: Vec<f64> = hs[1..].iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = diffs.iter().map(|d| d.ln()).collect();
        slope(&xs, &ys)
    } else {
        f64::INFINITY
    };
    let monotone = v.windows(2).all(|w| w[1] >= w[0]) || v.windows(2).all(|w| w[1] <= w[0]);
    Ok(ConvergenceTable { rows, order, fitted_order, extrapolate, monotone })
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Combine per-batch partial results in the fixed pairwise order.
pub fn reduce_ordered<T, F: Fn(T, T) -> T>(items: Vec<T>, combine: F) -> Option<T> {
    tree_reduce(items, combine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoxRegion, EpiWindow, LipschitzFn, Side};

    #[test]
    fn unit_square_quarter_grid() {
        let g = make_grid(&Domain::unit_square(), 0.25).unwrap();
        assert_eq!(g.len(), 16);
        for i in 0..16 {
            assert_eq!(g.volume(i), 0.0625);
            assert!(!g.is_partial(i));
        }
    }

    #[test]
    fn triangle_volume() {
        let t = Domain::convex_polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let g = make_grid(&t, 0.25).unwrap();
        assert!((g.total_volume() - 0.5).abs() < 0.0025);
    }

    #[test]
    fn trapezoid_volume() {
        let d = Domain::epigraph(
            LipschitzFn::affine(vec![0.5], 0.0),
            EpiWindow::Box(BoxRegion::unit(2)),
            Side::Upper,
        )
        .unwrap();
        let g = make_grid(&d, 1.0 / 16.0).unwrap();
        assert!((g.total_volume() - 0.75).abs() < 0.75 * 0.005);
    }

    #[test]
    fn too_coarse_grid_rejected() {
        assert!(matches!(make_grid(&Domain::unit_square(), 0.3), Err(Error::Resolution(_))));
    }

    #[test]
    fn node_count_across_levels() {
        let g = make_grid(&Domain::unit_square(), 0.25).unwrap();
        assert_eq!(g.nodes_per_cell(), 341);
    }

    #[test]
    fn stencil_mirror_symmetry() {
        let st = Stencils::new(2, 3);
        // offset o and −o have equally many entries
        let count = |o: &[i64]| st.stencils.iter().find(|s| s.offset == o).unwrap().entries.len();
        assert_eq!(count(&[1, 0]), count(&[-1, 0]));
        assert_eq!(count(&[1, -1]), count(&[-1, 1]));
    }

    #[test]
    fn zero_numerator() {
        let g = make_grid(&Domain::unit_square(), 0.125).unwrap();
        let v = double_integral(&g, &g, &PairKernelSpec::new(1.0, |_, _| 0.0)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn symmetric_plan_matches_full_sum() {
        let g = make_grid(&Domain::unit_square(), 0.125).unwrap();
        let k = PairKernelSpec::new(1.0, |x: &[f64], y: &[f64]| 1.0 + x[0] * y[0]);
        let sym = double_integral(&g, &g, &k).unwrap();
        let full = double_integral(&g, &g, &PairKernelSpec::new(1.0, |x: &[f64], y: &[f64]| 1.0 + x[0] * y[0]).asymmetric())
            .unwrap();
        assert!((sym - full).abs() < 1e-12 * full);
    }

    #[test]
    fn convergence_of_geometric_sequence() {
        let t = convergence_study(&[0.5, 0.25, 0.125], |h| Ok(1.0 + h)).unwrap();
        assert!((t.order - 1.0).abs() < 1e-12);
        assert!((t.extrapolate - 1.0).abs() < 1e-12);
        assert!(t.monotone);
    }
}
