//! Optical blocks and the window/cell decomposition of rectangular meshes.
//!
//! A mesh with `ni` ports and `nl` layers becomes `nl` windows. Each window is
//! an ordered list of cells that together cover all `ni` ports: an active
//! cell occupies two adjacent ports and holds one 2×2 block, a bypass cell
//! occupies one port and passes its signal through.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{Matrix2, C64, J, ONE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MeshKind {
    /// Beam splitter followed by a phase shifter, one phase per block.
    Fldzhyan,
    /// Mach-Zehnder interferometers with two phases per block.
    Clements,
}

impl MeshKind {
    pub fn params_per_block(self) -> usize {
        match self {
            MeshKind::Fldzhyan => 1,
            MeshKind::Clements => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MeshKind::Fldzhyan => "fldzhyan",
            MeshKind::Clements => "clements",
        }
    }
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fldzhyan" => Ok(MeshKind::Fldzhyan),
            "clements" | "mzi" => Ok(MeshKind::Clements),
            other => Err(Error::InvalidTopology(format!("unknown mesh kind '{other}'"))),
        }
    }
}

/// A 2×2 block and the indices of the phases it reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Fldzhyan { theta: usize },
    Mzi { theta: usize, phi: usize },
}

impl BlockKind {
    pub fn mesh_kind(&self) -> MeshKind {
        match self {
            BlockKind::Fldzhyan { .. } => MeshKind::Fldzhyan,
            BlockKind::Mzi { .. } => MeshKind::Clements,
        }
    }

    /// Phase indices in declaration order (θ, then φ for MZIs).
    pub fn param_indices(&self) -> impl Iterator<Item = usize> {
        let (first, second) = match *self {
            BlockKind::Fldzhyan { theta } => (theta, None),
            BlockKind::Mzi { theta, phi } => (theta, Some(phi)),
        };
        std::iter::once(first).chain(second)
    }

    /// Transfer matrix at the current phases.
    ///
    /// Fldzhyan: `(1/√2)[[e^{jθ}, j], [j·e^{jθ}, 1]]`.
    /// MZI: `P(θ)·BS·P(φ)·BS`, i.e.
    /// `(1/2)[[e^{j(θ+φ)} − e^{jθ}, j(e^{j(θ+φ)} + e^{jθ})], [j(e^{jφ} + 1), 1 − e^{jφ}]]`.
    pub fn matrix(&self, phases: &PhaseStore) -> Result<Matrix2> {
        self.check(phases.len())?;
        Ok(self.matrix_unchecked(phases.as_slice()))
    }

    #[inline]
    pub(crate) fn matrix_unchecked(&self, phases: &[f64]) -> Matrix2 {
        match *self {
            BlockKind::Fldzhyan { theta } => {
                let e = C64::from_polar(FRAC_1_SQRT_2, phases[theta]);
                let s = C64::new(FRAC_1_SQRT_2, 0.0);
                Matrix2::new(e, J * s, J * e, s)
            }
            BlockKind::Mzi { theta, phi } => {
                let et = C64::from_polar(0.5, phases[theta]);
                let ep = C64::from_polar(1.0, phases[phi]);
                let etp = et * ep;
                Matrix2::new(
                    etp - et,
                    J * (etp + et),
                    J * (ep + ONE) * 0.5,
                    (ONE - ep) * 0.5,
                )
            }
        }
    }

    /// Derivative of the transfer matrix with respect to each phase the block
    /// reads, in the order of [`BlockKind::param_indices`].
    #[inline]
    pub(crate) fn derivatives_unchecked(&self, phases: &[f64]) -> ([Matrix2; 2], usize) {
        let zero = C64::new(0.0, 0.0);
        match *self {
            BlockKind::Fldzhyan { theta } => {
                let e = C64::from_polar(FRAC_1_SQRT_2, phases[theta]);
                let d = Matrix2::new(J * e, zero, -e, zero);
                ([d, Matrix2::IDENTITY], 1)
            }
            BlockKind::Mzi { theta, phi } => {
                let et = C64::from_polar(0.5, phases[theta]);
                let ep = C64::from_polar(1.0, phases[phi]);
                let etp = et * ep;
                // θ only scales the top row by e^{jθ}
                let d_theta = Matrix2::new(J * (etp - et), -(etp + et), zero, zero);
                let d_phi = Matrix2::new(J * etp, -etp, -ep * 0.5, -J * ep * 0.5);
                ([d_theta, d_phi], 2)
            }
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        match self.param_indices().find(|&i| i >= len) {
            Some(index) => Err(Error::ParamIndex { index, len }),
            None => Ok(()),
        }
    }
}

/// One element of a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    /// Single pass-through port.
    Bypass,
    /// Block `B(layer, index)` spanning two adjacent ports.
    Active { block: BlockKind, layer: usize, index: usize },
}

impl Cell {
    pub fn is_active(&self) -> bool {
        matches!(self, Cell::Active { .. })
    }

    pub fn ports(&self) -> usize {
        if self.is_active() {
            2
        } else {
            1
        }
    }

    pub fn block(&self) -> Option<&BlockKind> {
        match self {
            Cell::Active { block, .. } => Some(block),
            Cell::Bypass => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Window {
    cells: Vec<Cell>,
}

impl Window {
    pub fn new(cells: Vec<Cell>) -> Self {
        Self { cells }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Number of ports the cells cover.
    pub fn ports(&self) -> usize {
        self.cells.iter().map(Cell::ports).sum()
    }

    /// Active cells with the port offset of their upper input.
    pub fn active_cells(&self) -> impl Iterator<Item = (usize, &BlockKind)> + '_ {
        let mut port = 0;
        self.cells.iter().filter_map(move |cell| {
            let p = port;
            port += cell.ports();
            cell.block().map(|b| (p, b))
        })
    }
}

/// Tunable phases in radians. Values are stored unwrapped.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseStore {
    values: Vec<f64>,
}

impl PhaseStore {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("phase {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeshTopology {
    kind: MeshKind,
    ni: usize,
    windows: Vec<Window>,
    num_params: usize,
}

impl MeshTopology {
    /// Rectangular Fldzhyan mesh.
    pub fn fldzhyan(ni: usize, nl: usize) -> Result<Self> {
        Self::rectangular(MeshKind::Fldzhyan, ni, nl)
    }

    /// Rectangular Clements mesh of MZIs.
    pub fn clements(ni: usize, nl: usize) -> Result<Self> {
        Self::rectangular(MeshKind::Clements, ni, nl)
    }

    /// Even layers start their blocks at port 0, odd layers at port 1; any
    /// port left uncovered at either edge becomes a bypass cell.
    pub fn rectangular(kind: MeshKind, ni: usize, nl: usize) -> Result<Self> {
        if ni < 2 {
            return Err(Error::InvalidTopology(format!("a mesh needs at least 2 ports, got {ni}")));
        }
        let mut next_param = 0;
        let mut windows = Vec::with_capacity(nl);
        for layer in 0..nl {
            let mut cells = Vec::with_capacity(ni / 2 + 2);
            let mut port = layer % 2;
            if port == 1 {
                cells.push(Cell::Bypass);
            }
            let mut index = 0;
            while port + 1 < ni {
                let block = match kind {
                    MeshKind::Fldzhyan => BlockKind::Fldzhyan { theta: next_param },
                    MeshKind::Clements => BlockKind::Mzi { theta: next_param, phi: next_param + 1 },
                };
                next_param += kind.params_per_block();
                cells.push(Cell::Active { block, layer, index });
                index += 1;
                port += 2;
            }
            if port < ni {
                cells.push(Cell::Bypass);
            }
            windows.push(Window::new(cells));
        }
        Ok(Self { kind, ni, windows, num_params: next_param })
    }

    /// A mesh with no windows; propagation is the identity.
    pub fn empty(kind: MeshKind, ni: usize) -> Self {
        Self { kind, ni, windows: Vec::new(), num_params: 0 }
    }

    /// Builds a topology from explicit windows, rejecting invariant violations.
    pub fn from_windows(kind: MeshKind, ni: usize, windows: Vec<Window>, num_params: usize) -> Result<Self> {
        let t = Self::from_parts_unchecked(kind, ni, windows, num_params);
        let violations = t.validate();
        if violations.is_empty() {
            Ok(t)
        } else {
            Err(Error::InvalidTopology(violations.join("; ")))
        }
    }

    /// Builds a topology without checking it. Call [`MeshTopology::validate`]
    /// before propagating through it.
    pub fn from_parts_unchecked(kind: MeshKind, ni: usize, windows: Vec<Window>, num_params: usize) -> Self {
        Self { kind, ni, windows, num_params }
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn ni(&self) -> usize {
        self.ni
    }

    pub fn nl(&self) -> usize {
        self.windows.len()
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn num_blocks(&self) -> usize {
        self.windows.iter().map(|w| w.active_cells().count()).sum()
    }

    /// Human-readable descriptions of every broken invariant; empty when valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = vec![0usize; self.num_params];
        for (w, window) in self.windows.iter().enumerate() {
            let ports = window.ports();
            if ports != self.ni {
                out.push(format!("window {w} covers {ports} ports, expected {}", self.ni));
            }
            for cell in window.cells() {
                let Some(block) = cell.block() else { continue };
                if block.mesh_kind() != self.kind {
                    out.push(format!("window {w} holds a {} block in a {} mesh", block.mesh_kind(), self.kind));
                }
                for idx in block.param_indices() {
                    match seen.get_mut(idx) {
                        Some(n) => *n += 1,
                        None => out.push(format!(
                            "window {w} references phase {idx} beyond num_params={}",
                            self.num_params
                        )),
                    }
                }
            }
        }
        for (idx, &n) in seen.iter().enumerate() {
            match n {
                1 => {}
                0 => out.push(format!("phase {idx} is not used by any block")),
                n => out.push(format!("phase {idx} is used by {n} blocks")),
            }
        }
        out
    }

    /// Parses the text form written by `Display`. Phase indices are assigned
    /// in reading order, so any placement table (including ones not produced
    /// by a built-in constructor) can be loaded.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::InvalidTopology("empty input".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || Error::InvalidTopology(format!("bad header '{header}'"));
        if fields.len() != 4 || fields[0] != "mesh" {
            return Err(bad_header());
        }
        let kind: MeshKind = fields[1].parse()?;
        let num = |field: &str, key: &str| -> Result<usize> {
            field
                .strip_prefix(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(bad_header)
        };
        let ni = num(fields[2], "ni=")?;
        let nl = num(fields[3], "nl=")?;

        let mut next_param = 0;
        let mut windows = Vec::with_capacity(nl);
        for (layer, line) in lines.enumerate() {
            let mut cells = Vec::new();
            for tok in line.split_whitespace() {
                if tok == "-" {
                    cells.push(Cell::Bypass);
                    continue;
                }
                let inner = tok
                    .strip_prefix("B(")
                    .and_then(|t| t.strip_suffix(')'))
                    .ok_or_else(|| Error::InvalidTopology(format!("bad cell '{tok}'")))?;
                let (i, k) = inner
                    .split_once(',')
                    .and_then(|(i, k)| Some((i.trim().parse().ok()?, k.trim().parse().ok()?)))
                    .ok_or_else(|| Error::InvalidTopology(format!("bad cell '{tok}'")))?;
                if i != layer {
                    return Err(Error::InvalidTopology(format!("cell {tok} listed in window {layer}")));
                }
                let block = match kind {
                    MeshKind::Fldzhyan => BlockKind::Fldzhyan { theta: next_param },
                    MeshKind::Clements => BlockKind::Mzi { theta: next_param, phi: next_param + 1 },
                };
                next_param += kind.params_per_block();
                cells.push(Cell::Active { block, layer: i, index: k });
            }
            windows.push(Window::new(cells));
        }
        if windows.len() != nl {
            return Err(Error::InvalidTopology(format!("header says nl={nl}, found {} windows", windows.len())));
        }
        Self::from_windows(kind, ni, windows, next_param)
    }
}

impl fmt::Display for MeshTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mesh {} ni={} nl={}", self.kind, self.ni, self.nl())?;
        for window in &self.windows {
            let cells: Vec<String> = window
                .cells()
                .iter()
                .map(|c| match c {
                    Cell::Bypass => "-".to_string(),
                    Cell::Active { layer, index, .. } => format!("B({layer},{index})"),
                })
                .collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ZERO;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn layout(t: &MeshTopology) -> Vec<Vec<Option<(usize, usize)>>> {
        t.windows()
            .iter()
            .map(|w| {
                w.cells()
                    .iter()
                    .map(|c| match c {
                        Cell::Bypass => None,
                        Cell::Active { layer, index, .. } => Some((*layer, *index)),
                    })
                    .collect()
            })
            .collect()
    }

    fn close(a: Matrix2, b: Matrix2, tol: f64) -> bool {
        [(a.a, b.a), (a.b, b.b), (a.c, b.c), (a.d, b.d)].iter().all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn fldzhyan_4x4_cell_table() {
        let t = MeshTopology::fldzhyan(4, 4).unwrap();
        assert_eq!(
            layout(&t),
            vec![
                vec![Some((0, 0)), Some((0, 1))],
                vec![None, Some((1, 0)), None],
                vec![Some((2, 0)), Some((2, 1))],
                vec![None, Some((3, 0)), None],
            ]
        );
        assert_eq!(t.num_params(), 6);
        assert!(t.validate().is_empty());
    }

    #[test]
    fn small_layouts() {
        let t = MeshTopology::fldzhyan(2, 1).unwrap();
        assert_eq!(layout(&t), vec![vec![Some((0, 0))]]);
        assert_eq!(t.num_params(), 1);

        let t = MeshTopology::fldzhyan(5, 2).unwrap();
        assert_eq!(
            layout(&t),
            vec![vec![Some((0, 0)), Some((0, 1)), None], vec![None, Some((1, 0)), Some((1, 1))]]
        );
        assert_eq!(t.num_params(), 4);

        let t = MeshTopology::clements(4, 4).unwrap();
        assert_eq!(layout(&t), layout(&MeshTopology::fldzhyan(4, 4).unwrap()));
        assert_eq!(t.num_params(), 12);

        let t = MeshTopology::clements(2, 1).unwrap();
        assert_eq!(t.num_params(), 2);

        let t = MeshTopology::clements(3, 2).unwrap();
        assert_eq!(layout(&t), vec![vec![Some((0, 0)), None], vec![None, Some((1, 0))]]);
        assert_eq!(t.num_params(), 4);
    }

    #[test]
    fn too_few_ports() {
        assert!(MeshTopology::fldzhyan(1, 3).is_err());
        assert!(MeshTopology::clements(0, 1).is_err());
    }

    #[test]
    fn exhaustive_counts_and_port_sums() {
        for ni in 2..=16 {
            for nl in 1..=16 {
                let f = MeshTopology::fldzhyan(ni, nl).unwrap();
                let c = MeshTopology::clements(ni, nl).unwrap();
                let expected: usize = (0..nl).map(|i| (ni - i % 2) / 2).sum();
                let counted: usize = f.windows().iter().map(|w| w.cells().iter().filter(|c| c.is_active()).count()).sum();
                assert_eq!(counted, expected, "ni={ni} nl={nl}");
                assert_eq!(f.num_params(), expected);
                assert_eq!(c.num_params(), 2 * f.num_params());
                assert!(f.windows().iter().all(|w| w.ports() == ni));
                assert!(f.validate().is_empty() && c.validate().is_empty());
            }
        }
    }

    #[test]
    fn block_matrix_values() {
        let s = FRAC_1_SQRT_2;
        let fl = BlockKind::Fldzhyan { theta: 0 };
        let m = fl.matrix(&PhaseStore::zeros(1)).unwrap();
        assert!(close(m, Matrix2::beam_splitter(), 1e-16));

        let m = fl.matrix(&PhaseStore::from_vec(vec![FRAC_PI_2]).unwrap()).unwrap();
        let want = Matrix2::new(C64::new(0.0, s), C64::new(0.0, s), C64::new(-s, 0.0), C64::new(s, 0.0));
        assert!(close(m, want, 1e-15));

        let mzi = BlockKind::Mzi { theta: 0, phi: 1 };
        let m = mzi.matrix(&PhaseStore::zeros(2)).unwrap();
        assert!(close(m, Matrix2::new(ZERO, J, J, ZERO), 1e-16));

        assert!(matches!(mzi.matrix(&PhaseStore::zeros(1)), Err(Error::ParamIndex { index: 1, len: 1 })));
    }

    #[test]
    fn block_formulas_match_component_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bs = Matrix2::beam_splitter();
        for _ in 0..100 {
            let (t, p) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
            let ph = PhaseStore::from_vec(vec![t, p]).unwrap();
            let fl = BlockKind::Fldzhyan { theta: 0 }.matrix(&ph).unwrap();
            assert!(close(fl, bs * Matrix2::phase_shifter(t), 1e-15));
            let mzi = BlockKind::Mzi { theta: 0, phi: 1 }.matrix(&ph).unwrap();
            let composed = Matrix2::phase_shifter(t) * bs * Matrix2::phase_shifter(p) * bs;
            assert!(close(mzi, composed, 1e-15));
            for m in [fl, mzi] {
                assert!(m.to_dense().hermitian_deviation().unwrap() <= 1e-15);
            }
        }
    }

    #[test]
    fn block_derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        for block in [BlockKind::Fldzhyan { theta: 0 }, BlockKind::Mzi { theta: 0, phi: 1 }] {
            for _ in 0..20 {
                let base = vec![rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)];
                let (derivs, n) = block.derivatives_unchecked(&base);
                for (slot, d) in derivs.iter().take(n).enumerate() {
                    let (mut hi, mut lo) = (base.clone(), base.clone());
                    hi[slot] += h;
                    lo[slot] -= h;
                    let (mh, ml) = (block.matrix_unchecked(&hi), block.matrix_unchecked(&lo));
                    let fd = Matrix2::new(
                        (mh.a - ml.a) / (2.0 * h),
                        (mh.b - ml.b) / (2.0 * h),
                        (mh.c - ml.c) / (2.0 * h),
                        (mh.d - ml.d) / (2.0 * h),
                    );
                    assert!(close(*d, fd, 1e-9), "{block:?} slot {slot}");
                }
            }
        }
    }

    #[test]
    fn validate_reports_defects() {
        let good = MeshTopology::fldzhyan(4, 4).unwrap();
        let mut windows = good.windows().to_vec();
        windows[1] = Window::new(vec![Cell::Bypass, windows[1].cells()[1]]);
        let short = MeshTopology::from_parts_unchecked(MeshKind::Fldzhyan, 4, windows, 6);
        let v = short.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("3 ports"));

        // B(2,1) reuses phase 4 and phase 5 (B(3,0)) moves to index 4 as well
        let cells = |w: &Window| w.cells().to_vec();
        let mut windows: Vec<Vec<Cell>> = good.windows().iter().map(cells).collect();
        windows[3][1] = Cell::Active { block: BlockKind::Fldzhyan { theta: 4 }, layer: 3, index: 0 };
        let dup = MeshTopology::from_parts_unchecked(
            MeshKind::Fldzhyan,
            4,
            windows.into_iter().map(Window::new).collect(),
            5,
        );
        let v = dup.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("used by 2 blocks"));
    }

    #[test]
    fn text_round_trip() {
        let t = MeshTopology::fldzhyan(4, 4).unwrap();
        let text = t.to_string();
        assert_eq!(text, "mesh fldzhyan ni=4 nl=4\nB(0,0) B(0,1)\n- B(1,0) -\nB(2,0) B(2,1)\n- B(3,0) -\n");
        assert_eq!(MeshTopology::parse(&text).unwrap(), t);
        for ni in [2, 3, 7, 8] {
            let c = MeshTopology::clements(ni, ni + 1).unwrap();
            assert_eq!(MeshTopology::parse(&c.to_string()).unwrap(), c);
        }
        assert!(MeshTopology::parse("mesh fldzhyan ni=4 nl=1\nB(0,0) -\n").is_err());
    }
}
