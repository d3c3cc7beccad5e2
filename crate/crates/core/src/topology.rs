//! Chimera graphs, their visible/hidden bipartition and pixel-to-unit maps.
//!
//! `C(M, N, L)` is an `M × N` grid of cells; each cell is a complete
//! bipartite `K_{L,L}` between its left and right shore. Left-shore unit `k`
//! couples to left-shore unit `k` of the cell below, right-shore unit `k` to
//! right-shore unit `k` of the cell to the right.
//!
//! Node numbering: `((row · N + col) · 2 + shore) · L + k`, shore 0 = left.

use alloc::{collections::VecDeque, format, string::String, vec, vec::Vec};

use crate::constraints::{ConnectivityMask, MaskProvenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChimeraGraph {
    rows: usize,
    cols: usize,
    shore: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

/// Position of a node inside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeCoord {
    pub row: usize,
    pub col: usize,
    /// 0 = left shore, 1 = right shore.
    pub shore: usize,
    pub k: usize,
}

/// Closed-form edge count of `C(rows, cols, shore)`.
pub fn chimera_edge_count(rows: usize, cols: usize, shore: usize) -> usize {
    rows * cols * shore * shore + shore * (cols * rows.saturating_sub(1) + rows * cols.saturating_sub(1))
}

impl ChimeraGraph {
    pub fn new(rows: usize, cols: usize, shore: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || shore == 0 {
            return Err(Error::invalid("chimera dimensions", "M, N and L must all be at least 1"));
        }
        let mut g = Self {
            rows,
            cols,
            shore,
            edges: Vec::with_capacity(chimera_edge_count(rows, cols, shore)),
            adjacency: vec![Vec::new(); 2 * rows * cols * shore],
        };
        for r in 0..rows {
            for c in 0..cols {
                for a in 0..shore {
                    for b in 0..shore {
                        g.add_edge(g.node(r, c, 0, a), g.node(r, c, 1, b));
                    }
                }
                for k in 0..shore {
                    if r + 1 < rows {
                        g.add_edge(g.node(r, c, 0, k), g.node(r + 1, c, 0, k));
                    }
                    if c + 1 < cols {
                        g.add_edge(g.node(r, c, 1, k), g.node(r, c + 1, 1, k));
                    }
                }
            }
        }
        Ok(g)
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.edges.push((a, b));
        self.adjacency[a].push(b);
        self.adjacency[b].push(a);
    }

    pub fn node(&self, row: usize, col: usize, shore: usize, k: usize) -> usize {
        ((row * self.cols + col) * 2 + shore) * self.shore + k
    }

    pub fn coord(&self, node: usize) -> NodeCoord {
        let k = node % self.shore;
        let rest = node / self.shore;
        let shore = rest % 2;
        let cell = rest / 2;
        NodeCoord {
            row: cell / self.cols,
            col: cell % self.cols,
            shore,
            k,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shore(&self) -> usize {
        self.shore
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn label(&self) -> String {
        format!("C({},{},{})", self.rows, self.cols, self.shore)
    }
}

pub fn build_chimera(rows: usize, cols: usize, shore: usize) -> Result<ChimeraGraph> {
    ChimeraGraph::new(rows, cols, shore)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Visible units.
    A,
    /// Hidden units.
    B,
}

/// A 2-colouring of a graph plus the unit numbering it induces: visible
/// units are the A nodes in increasing node order, hidden units the B nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    sides: Vec<Side>,
    visible: Vec<usize>,
    hidden: Vec<usize>,
    unit_of: Vec<usize>,
}

impl Coloring {
    fn from_sides(sides: Vec<Side>) -> Self {
        let mut visible = Vec::new();
        let mut hidden = Vec::new();
        let mut unit_of = vec![0; sides.len()];
        for (node, side) in sides.iter().enumerate() {
            let list = match side {
                Side::A => &mut visible,
                Side::B => &mut hidden,
            };
            unit_of[node] = list.len();
            list.push(node);
        }
        Self {
            sides,
            visible,
            hidden,
            unit_of,
        }
    }

    pub fn side(&self, node: usize) -> Side {
        self.sides[node]
    }

    /// Node ids of the visible units, indexed by visible unit.
    pub fn visible_nodes(&self) -> &[usize] {
        &self.visible
    }

    pub fn hidden_nodes(&self) -> &[usize] {
        &self.hidden
    }

    /// Index of `node` among the units of its side.
    pub fn unit_of(&self, node: usize) -> usize {
        self.unit_of[node]
    }

    /// The colouring with sides A and B exchanged.
    pub fn swapped(&self) -> Self {
        Self::from_sides(
            self.sides
                .iter()
                .map(|s| match s {
                    Side::A => Side::B,
                    Side::B => Side::A,
                })
                .collect(),
        )
    }
}

/// Breadth-first 2-colouring; each component starts from its lowest node on side A.
pub fn bipartition(graph: &ChimeraGraph) -> Result<Coloring> {
    let n = graph.num_nodes();
    let mut sides: Vec<Option<Side>> = vec![None; n];
    let mut queue = VecDeque::new();
    for start in 0..n {
        if sides[start].is_some() {
            continue;
        }
        sides[start] = Some(Side::A);
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            let here = sides[node].expect("queued nodes are coloured");
            let other = if here == Side::A { Side::B } else { Side::A };
            for &next in graph.neighbors(node) {
                match sides[next] {
                    None => {
                        sides[next] = Some(other);
                        queue.push_back(next);
                    }
                    Some(s) if s == here => return Err(Error::OddCycle(node, next)),
                    Some(_) => {}
                }
            }
        }
    }
    Ok(Coloring::from_sides(sides.into_iter().map(|s| s.expect("all nodes visited")).collect()))
}

/// `N × D` mask allowing (hidden `j`, visible `i`) exactly when the two
/// nodes share an edge.
pub fn chimera_mask(graph: &ChimeraGraph, coloring: &Coloring) -> Result<ConnectivityMask> {
    let d = coloring.visible.len();
    let n = coloring.hidden.len();
    let mut allowed = vec![false; d * n];
    for &(a, b) in graph.edges() {
        let (vis, hid) = match (coloring.side(a), coloring.side(b)) {
            (Side::A, Side::B) => (a, b),
            (Side::B, Side::A) => (b, a),
            _ => return Err(Error::OddCycle(a, b)),
        };
        allowed[coloring.unit_of(hid) * d + coloring.unit_of(vis)] = true;
    }
    ConnectivityMask::from_allowed(
        d,
        n,
        allowed,
        MaskProvenance::Chimera {
            mapping: graph.label(),
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingKind {
    /// Every unit shows its own pixel; used for non-image or unmapped data.
    Identity,
    PixelBlocks,
    ExtendedPixelBlocks,
    /// Read from a mapping file.
    Custom,
}

impl MappingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MappingKind::Identity => "identity",
            MappingKind::PixelBlocks => "pixel_blocks",
            MappingKind::ExtendedPixelBlocks => "extended_pixel_blocks",
            MappingKind::Custom => "custom",
        }
    }
}

impl core::str::FromStr for MappingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(MappingKind::Identity),
            "pixel_blocks" => Ok(MappingKind::PixelBlocks),
            "extended_pixel_blocks" => Ok(MappingKind::ExtendedPixelBlocks),
            "custom" => Ok(MappingKind::Custom),
            other => Err(Error::invalid("mapping", format!("unknown mapping kind `{other}`"))),
        }
    }
}

/// Assigns each visible unit one image pixel (row-major index).
///
/// Several units may share a pixel. During training the units tied to a
/// pixel all take that pixel's binarised value; when rendering, a pixel shows
/// the mean of its units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMapping {
    width: usize,
    height: usize,
    kind: MappingKind,
    unit_pixel: Vec<usize>,
}

impl PixelMapping {
    pub fn new(width: usize, height: usize, kind: MappingKind, unit_pixel: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = unit_pixel.iter().find(|&&p| p >= width * height) {
            return Err(Error::invalid(
                "pixel mapping",
                format!("pixel index {bad} outside a {width}x{height} image"),
            ));
        }
        Ok(Self {
            width,
            height,
            kind,
            unit_pixel,
        })
    }

    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            kind: MappingKind::Identity,
            unit_pixel: (0..width * height).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn num_units(&self) -> usize {
        self.unit_pixel.len()
    }

    pub fn kind(&self) -> MappingKind {
        self.kind
    }

    /// Row-major pixel index backing `unit`.
    pub fn pixel_of(&self, unit: usize) -> usize {
        self.unit_pixel[unit]
    }

    /// `(row, col)` of the pixel backing `unit`.
    pub fn pixel_coord(&self, unit: usize) -> (usize, usize) {
        let p = self.unit_pixel[unit];
        (p / self.width, p % self.width)
    }

    pub fn unit_pixels(&self) -> &[usize] {
        &self.unit_pixel
    }

    /// For each pixel, the units it backs.
    pub fn units_of_pixels(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_pixels()];
        for (unit, &p) in self.unit_pixel.iter().enumerate() {
            out[p].push(unit);
        }
        out
    }

    /// Spreads per-pixel values onto visible units.
    pub fn project<T: Copy>(&self, pixels: &[T]) -> Result<Vec<T>> {
        crate::error::check_len("image pixels", self.num_pixels(), pixels.len())?;
        Ok(self.unit_pixel.iter().map(|&p| pixels[p]).collect())
    }

    /// Renders per-unit values as an image: each backed pixel shows the mean
    /// of its units, unbacked pixels the mean of their backed 8-neighbours
    /// (0 when there are none).
    pub fn render(&self, unit_values: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len("unit values", self.num_units(), unit_values.len())?;
        let mut sum = vec![0.0; self.num_pixels()];
        let mut count = vec![0usize; self.num_pixels()];
        for (&p, &x) in self.unit_pixel.iter().zip(unit_values) {
            sum[p] += x;
            count[p] += 1;
        }
        let backed: Vec<Option<f64>> = sum
            .iter()
            .zip(&count)
            .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
            .collect();
        let (w, h) = (self.width, self.height);
        Ok((0..w * h)
            .map(|p| {
                backed[p].unwrap_or_else(|| {
                    let (r, c) = ((p / w) as isize, (p % w) as isize);
                    let mut acc = 0.0;
                    let mut n = 0usize;
                    for dr in -1..=1 {
                        for dc in -1..=1 {
                            let (rr, cc) = (r + dr, c + dc);
                            if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                                continue;
                            }
                            if let Some(x) = backed[rr as usize * w + cc as usize] {
                                acc += x;
                                n += 1;
                            }
                        }
                    }
                    if n == 0 {
                        0.0
                    } else {
                        acc / n as f64
                    }
                })
            })
            .collect())
    }
}

fn block_mapping_precheck(
    width: usize,
    height: usize,
    graph: &ChimeraGraph,
    coloring: &Coloring,
) -> Result<()> {
    if graph.shore() != 4 {
        return Err(Error::invalid("chimera shore", format!("pixel blocks need L = 4, got {}", graph.shore())));
    }
    if height != 2 * graph.rows() || width != 2 * graph.cols() {
        return Err(Error::invalid(
            "image size",
            format!(
                "{width}x{height} image does not match a {}x{} cell grid of 2x2 blocks",
                graph.rows(),
                graph.cols()
            ),
        ));
    }
    if coloring.visible_nodes().len() != width * height {
        return Err(Error::DimensionMismatch {
            what: "visible units",
            expected: width * height,
            actual: coloring.visible_nodes().len(),
        });
    }
    Ok(())
}

fn block_mapping(
    width: usize,
    height: usize,
    graph: &ChimeraGraph,
    coloring: &Coloring,
    kind: MappingKind,
) -> Result<PixelMapping> {
    block_mapping_precheck(width, height, graph, coloring)?;
    let spacing = match kind {
        MappingKind::ExtendedPixelBlocks => 2,
        _ => 1,
    };
    let unit_pixel = coloring
        .visible_nodes()
        .iter()
        .map(|&node| {
            let at = graph.coord(node);
            let row = (2 * at.row + spacing * (at.k / 2)).min(height - 1);
            let col = (2 * at.col + spacing * (at.k % 2)).min(width - 1);
            row * width + col
        })
        .collect();
    PixelMapping::new(width, height, kind, unit_pixel)
}

/// Non-overlapping 2×2 blocks: cell `(i, j)`'s visible unit `k` shows pixel
/// `(2i + k / 2, 2j + k % 2)`. A bijection between pixels and visible units.
pub fn pixel_blocks_mapping(
    width: usize,
    height: usize,
    graph: &ChimeraGraph,
    coloring: &Coloring,
) -> Result<PixelMapping> {
    block_mapping(width, height, graph, coloring, MappingKind::PixelBlocks)
}

/// Overlapping blocks: cell `(i, j)` covers the 4×4 window starting at
/// `(2i, 2j)` (truncated at the border) and its four units sample the window
/// at offsets `{0, 2} × {0, 2}`, clamped into the image. Interior
/// even-coordinate pixels back four units in neighbouring cells; with as many
/// units as pixels, the odd-coordinate interior pixels back none.
pub fn extended_pixel_blocks_mapping(
    width: usize,
    height: usize,
    graph: &ChimeraGraph,
    coloring: &Coloring,
) -> Result<PixelMapping> {
    block_mapping(width, height, graph, coloring, MappingKind::ExtendedPixelBlocks)
}
