//! Time stepping: conventional, push and pull iteration orderings.
//!
//! All three orderings advance the same physical state and call the same
//! per-node kernels in the same order, so they differ only in where the
//! data movement happens:
//!
//! * pull: gather `f_i(x - e_i)`, resolve walls, collide, write aligned.
//!   The stored buffer holds post-collision populations.
//! * push: read aligned, collide, scatter to `x + e_i`; populations that
//!   would leave the domain are reflected into the opposite slot. The
//!   stored buffer holds post-streaming populations.
//! * conventional: collide-and-scatter using the density and velocity kept
//!   from the previous step, a full barrier, then a second pass that adds
//!   the moving-wall terms and recomputes the macroscopic fields.
//!
//! Every node is written by exactly one worker and there is no reduction
//! inside a step, so results do not depend on the worker count.

mod cavity;
mod config;

pub use cavity::{run_cavity, run_cavity_typed, CavityResult, Profile, STEADY_CHECK_INTERVAL};
pub use config::{derive_scaling, Ordering, Precision, ScalingInput, SimConfig};

use rayon::prelude::*;
use thiserror::Error;

use crate::error::ConfigError;
use crate::kernels::{apply_boundary, equilibrium, moments, moments_unchecked, relax, MacroState, RelaxationParams};
use crate::lattice::{
    flatten_index, make_d3q19, rows_mut, unknown_mask, CellClassification, CellFlag, DistributionField, DomainDims,
    LatticeDescriptor, Layout, OPPOSITE, Q,
};
use crate::scalar::Real;
use crate::streaming::{
    gather_line, scatter_from_row, shifted_row, Boundary, SharedBuf, StreamStrategy, Strided,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation diverged at step {step}: density {rho} at node ({x}, {y}, {z})")]
    Diverged { step: usize, x: usize, y: usize, z: usize, rho: f64 },
    #[error("step {step} left slot {offset} (direction {i}, node ({x}, {y}, {z})) unwritten")]
    MissedSlot { step: usize, offset: usize, i: usize, x: usize, y: usize, z: usize },
}

/// Per-node density and velocity, stored only when requested (and always
/// for the conventional ordering, which depends on them).
#[derive(Clone, Debug, PartialEq)]
pub struct MacroField<T> {
    pub rho: Vec<T>,
    pub u: Vec<[T; 3]>,
}

impl<T: Real> MacroField<T> {
    fn new(cells: usize) -> Self {
        Self { rho: vec![T::zero(); cells], u: vec![[T::zero(); 3]; cells] }
    }

    pub fn state(&self, cell: usize) -> MacroState<T> {
        MacroState { rho: self.rho[cell], u: self.u[cell] }
    }

    fn rows_mut(&mut self, nx: usize) -> Vec<MacroRow<'_, T>> {
        self.rho.chunks_mut(nx).zip(self.u.chunks_mut(nx)).map(|(rho, u)| MacroRow { rho, u }).collect()
    }
}

struct MacroRow<'a, T> {
    rho: &'a mut [T],
    u: &'a mut [[T; 3]],
}

impl<T: Copy> MacroRow<'_, T> {
    #[inline]
    fn store(&mut self, x: usize, m: &MacroState<T>) {
        self.rho[x] = m.rho;
        self.u[x] = m.u;
    }
}

/// One lattice with its boundary flags and time-stepping parameters.
#[derive(Clone, Debug)]
pub struct Solver<T> {
    desc: LatticeDescriptor<T>,
    field: DistributionField<T>,
    flags: CellClassification<T>,
    params: RelaxationParams<T>,
    ordering: Ordering,
    strategy: StreamStrategy,
    boundary: Boundary,
    macros: Option<MacroField<T>>,
    poison_check: bool,
    step: usize,
}

/// Per-worker scratch: a row of populations in direction-major order plus
/// the strategy's tile or lane buffer.
struct RowScratch<T> {
    line: Vec<T>,
    shift: Vec<T>,
}

impl<T: Real> RowScratch<T> {
    fn new(nx: usize) -> Self {
        Self { line: vec![T::zero(); Q * nx], shift: Vec::new() }
    }
}

/// Lowest-index failing node wins, so reports do not depend on scheduling.
type NodeFailure = (usize, f64);

#[inline]
fn read_node<T: Copy>(buf: &[T], dims: DomainDims, layout: Layout, cell: usize) -> [T; Q] {
    match layout {
        Layout::SoA => {
            let n = dims.cells();
            std::array::from_fn(|i| buf[i * n + cell])
        }
        Layout::AoS => std::array::from_fn(|i| buf[Q * cell + i]),
    }
}

#[inline]
fn slot(dims: DomainDims, layout: Layout, i: usize, cell: usize) -> usize {
    match layout {
        Layout::SoA => i * dims.cells() + cell,
        Layout::AoS => Q * cell + i,
    }
}

impl<T: Real> Solver<T> {
    /// Solver over an explicit flag grid; the field starts at rest
    /// equilibrium with unit density.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        flags: CellClassification<T>,
        layout: Layout,
        tau: f64,
        ordering: Ordering,
        strategy: StreamStrategy,
        boundary: Boundary,
        store_macros: bool,
    ) -> Result<Self, ConfigError> {
        let dims = flags.dims();
        strategy.validate(dims)?;
        flags.validate(boundary.wraps())?;
        let params = RelaxationParams::new(T::from_f64_lossy(tau))?;
        let macros = (store_macros || ordering == Ordering::Conventional).then(|| MacroField::new(dims.cells()));
        let mut solver = Self {
            desc: make_d3q19(),
            field: DistributionField::new(dims, layout),
            flags,
            params,
            ordering,
            strategy,
            boundary,
            macros,
            poison_check: false,
            step: 0,
        };
        solver.init_with(|_, _, _| MacroState::rest());
        Ok(solver)
    }

    /// Lid-driven cavity solver described by `config`.
    pub fn from_config(config: &SimConfig) -> Result<Self, ConfigError> {
        let (tau, lid) = config.resolve()?;
        let dims = config.dims;
        if dims.nx < 2 || dims.ny < 2 || dims.nz < 2 {
            return Err(ConfigError::DomainTooSmall(dims.nx.min(dims.ny).min(dims.nz)));
        }
        let flags = CellClassification::cavity(dims, [T::from_f64_lossy(lid), T::zero(), T::zero()]);
        let mut s = Self::new(
            flags,
            config.layout,
            tau,
            config.ordering,
            config.strategy,
            Boundary::Bounded,
            config.store_macros,
        )?;
        s.poison_check = config.poison_check;
        Ok(s)
    }

    /// Sets every node to the equilibrium of `state(x, y, z)` and resets the
    /// step counter.
    pub fn init_with(&mut self, mut state: impl FnMut(usize, usize, usize) -> MacroState<T>) {
        let dims = self.field.dims();
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    let feq = equilibrium(&state(x, y, z), &self.desc);
                    self.field.set_node(x, y, z, &feq);
                }
            }
        }
        self.step = 0;
        self.refresh_macros();
    }

    /// Replaces the current populations, e.g. with a random field.
    pub fn load_populations(&mut self, f: &[T]) {
        self.field.current_mut().copy_from_slice(f);
        self.step = 0;
        self.refresh_macros();
    }

    fn refresh_macros(&mut self) {
        let dims = self.field.dims();
        let layout = self.field.layout();
        if let Some(m) = self.macros.as_mut() {
            for cell in 0..dims.cells() {
                let s = moments_unchecked(&read_node(self.field.current(), dims, layout, cell), &self.desc);
                m.rho[cell] = s.rho;
                m.u[cell] = s.u;
            }
        }
    }

    pub fn set_poison_check(&mut self, on: bool) {
        self.poison_check = on;
    }

    pub fn dims(&self) -> DomainDims {
        self.field.dims()
    }

    pub fn field(&self) -> &DistributionField<T> {
        &self.field
    }

    pub fn flags(&self) -> &CellClassification<T> {
        &self.flags
    }

    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    pub fn strategy(&self) -> StreamStrategy {
        self.strategy
    }

    pub fn tau(&self) -> T {
        self.params.tau()
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Stored macroscopic fields, when kept.
    pub fn macros(&self) -> Option<&MacroField<T>> {
        self.macros.as_ref()
    }

    /// Moments of the stored populations of every node.
    ///
    /// For pull the stored populations are post-collision; collision
    /// conserves both moments, so this agrees with the other orderings up to
    /// rounding.
    pub fn macro_state(&self) -> Vec<MacroState<T>> {
        let dims = self.dims();
        let layout = self.field.layout();
        (0..dims.cells())
            .into_par_iter()
            .map(|cell| moments_unchecked(&read_node(self.field.current(), dims, layout, cell), &self.desc))
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.field.total_mass()
    }

    /// Advances one step with the configured ordering.
    pub fn step(&mut self) -> Result<(), SolverError> {
        match self.ordering {
            Ordering::Pull => self.step_pull(),
            Ordering::Push => self.step_push(),
            Ordering::Conventional => self.step_conventional(),
        }
    }

    pub fn run(&mut self, steps: usize) -> Result<(), SolverError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn begin_step(&mut self) {
        if self.poison_check {
            self.field.poison_next();
        }
    }

    fn finish_step(&mut self, failure: Option<NodeFailure>) -> Result<(), SolverError> {
        let step = self.step + 1;
        if let Some((cell, rho)) = failure {
            let d = self.dims();
            return Err(SolverError::Diverged { step, x: cell % d.nx, y: (cell / d.nx) % d.ny, z: cell / (d.nx * d.ny), rho });
        }
        self.field.swap();
        self.step = step;
        if self.poison_check {
            if let Some(offset) = self.field.current().iter().position(|v| v.is_nan()) {
                let (i, x, y, z) = crate::lattice::unflatten_index(offset, self.dims(), self.field.layout());
                return Err(SolverError::MissedSlot { step, offset, i, x, y, z });
            }
        }
        Ok(())
    }

    /// Pull ordering: gather, boundary, moments, equilibrium, collide.
    pub fn step_pull(&mut self) -> Result<(), SolverError> {
        self.begin_step();
        let dims = self.dims();
        let layout = self.field.layout();
        let nx = dims.nx;
        let wrap = self.boundary.wraps();
        let (desc, flags, params, strategy) = (&self.desc, &self.flags, &self.params, &self.strategy);
        let mut macros = self.macros.take();
        let (src, dst) = self.field.split();
        let rows = rows_mut(dst, dims, layout);
        let macro_rows = split_macro_rows(macros.as_mut(), dims);
        let failure = rows
            .into_par_iter()
            .zip(macro_rows)
            .enumerate()
            .map_init(
                || RowScratch::<T>::new(nx),
                |scr, (r, (mut row, mut mrow))| {
                    let (y, z) = (r % dims.ny, r / dims.ny);
                    for i in 0..Q {
                        let e = crate::lattice::VELOCITIES[i];
                        let Some(srow) = shifted_row(dims, y, z, -(e[1] as isize), -(e[2] as isize), wrap) else {
                            continue;
                        };
                        let mut d: &mut [T] = &mut scr.line[i * nx..(i + 1) * nx];
                        match layout {
                            Layout::SoA => {
                                let start = i * dims.cells() + srow * nx;
                                let s: &[T] = &src[start..start + nx];
                                gather_line(strategy, &s, &mut d, nx, e[0], wrap, &mut scr.shift);
                            }
                            Layout::AoS => {
                                let s = Strided { data: src, base: srow * Q * nx + i, stride: Q };
                                gather_line(strategy, &s, &mut d, nx, e[0], wrap, &mut scr.shift);
                            }
                        }
                    }
                    for x in 0..nx {
                        let cell = dims.cell_index(x, y, z);
                        let mut f: [T; Q] = std::array::from_fn(|i| scr.line[i * nx + x]);
                        let mask = if wrap { 0 } else { unknown_mask(dims, x, y, z) };
                        if mask != 0 {
                            let outgoing = read_node(src, dims, layout, cell);
                            apply_boundary(
                                flags.flag_at(cell),
                                mask,
                                &flags.wall_velocity_at(cell),
                                desc,
                                &outgoing,
                                &mut f,
                            );
                        }
                        let m = match moments(&f, desc) {
                            Ok(m) => m,
                            Err(e) => return Some((cell, e.rho)),
                        };
                        if let Some(mr) = mrow.as_mut() {
                            mr.store(x, &m);
                        }
                        relax(&mut f, &equilibrium(&m, desc), params);
                        for (i, &v) in f.iter().enumerate() {
                            scr.line[i * nx + x] = v;
                        }
                    }
                    for i in 0..Q {
                        row.store_line(i, &scr.line[i * nx..(i + 1) * nx]);
                    }
                    None
                },
            )
            .flatten()
            .min_by(|a, b| a.0.cmp(&b.0));
        self.macros = macros;
        self.finish_step(failure)
    }

    /// Push ordering: moments, equilibrium, collide, scatter. Populations
    /// leaving the domain are reflected (with the wall momentum term) into
    /// the opposite slot of the same node.
    pub fn step_push(&mut self) -> Result<(), SolverError> {
        self.begin_step();
        let failure = self.collide_and_scatter(true);
        self.finish_step(failure)
    }

    /// Conventional ordering: kernel 1 collides with the stored macroscopic
    /// fields and scatters; after a full barrier, kernel 2 applies the wall
    /// terms and recomputes the macroscopic fields.
    pub fn step_conventional(&mut self) -> Result<(), SolverError> {
        self.begin_step();
        // kernel 1; the rayon join below is the mid-step barrier
        let failure = self.collide_and_scatter(false);
        if failure.is_some() {
            return self.finish_step(failure);
        }
        // kernel 2
        let dims = self.dims();
        let layout = self.field.layout();
        let nx = dims.nx;
        let wrap = self.boundary.wraps();
        let (desc, flags) = (&self.desc, &self.flags);
        let macros = self.macros.as_mut().expect("conventional ordering keeps macroscopic fields");
        let rows = rows_mut(self.field.next_mut(), dims, layout);
        let failure = rows
            .into_par_iter()
            .zip(macros.rows_mut(nx))
            .enumerate()
            .map(|(r, (mut row, mut mrow))| {
                let (y, z) = (r % dims.ny, r / dims.ny);
                for x in 0..nx {
                    let cell = dims.cell_index(x, y, z);
                    let mut f: [T; Q] = std::array::from_fn(|i| row.get(i, x));
                    let mask = if wrap { 0 } else { unknown_mask(dims, x, y, z) };
                    if mask != 0 {
                        // kernel 1 left the raw reflection of f_opp(i) in slot i
                        let outgoing: [T; Q] = std::array::from_fn(|j| f[OPPOSITE[j]]);
                        apply_boundary(flags.flag_at(cell), mask, &flags.wall_velocity_at(cell), desc, &outgoing, &mut f);
                        for (i, &v) in f.iter().enumerate() {
                            if mask & (1 << i) != 0 {
                                row.set(i, x, v);
                            }
                        }
                    }
                    match moments(&f, desc) {
                        Ok(m) => mrow.store(x, &m),
                        Err(e) => return Some((cell, e.rho)),
                    }
                }
                None
            })
            .flatten()
            .min_by(|a, b| a.0.cmp(&b.0));
        self.finish_step(failure)
    }

    /// Shared body of push (`complete_walls`) and conventional kernel 1.
    fn collide_and_scatter(&mut self, complete_walls: bool) -> Option<NodeFailure> {
        let dims = self.dims();
        let layout = self.field.layout();
        let nx = dims.nx;
        let wrap = self.boundary.wraps();
        let (desc, flags, params, strategy) = (&self.desc, &self.flags, &self.params, &self.strategy);
        let use_stored = !complete_walls;
        let mut macros = self.macros.take();
        let (src, dst) = self.field.split();
        let shared = SharedBuf::new(dst);
        let failure = {
            let (stored_ref, macro_rows): (Option<&MacroField<T>>, Vec<Option<MacroRow<'_, T>>>) =
                match (use_stored, macros.as_mut()) {
                    (true, Some(m)) => {
                        let m: &MacroField<T> = m;
                        (Some(m), (0..dims.rows()).map(|_| None).collect())
                    }
                    (_, m) => (None, split_macro_rows(m, dims)),
                };
            macro_rows
                .into_par_iter()
                .enumerate()
                .map_init(
                    || RowScratch::<T>::new(nx),
                    |scr, (r, mut mrow)| {
                        let (y, z) = (r % dims.ny, r / dims.ny);
                        for x in 0..nx {
                            let cell = dims.cell_index(x, y, z);
                            let mut f = read_node(src, dims, layout, cell);
                            let m = match stored_ref {
                                Some(mf) => mf.state(cell),
                                None => match moments(&f, desc) {
                                    Ok(m) => m,
                                    Err(e) => return Some((cell, e.rho)),
                                },
                            };
                            if let Some(mr) = mrow.as_mut() {
                                mr.store(x, &m);
                            }
                            relax(&mut f, &equilibrium(&m, desc), params);
                            for (i, &v) in f.iter().enumerate() {
                                scr.line[i * nx + x] = v;
                            }
                            let mask = if wrap { 0 } else { unknown_mask(dims, x, y, z) };
                            if mask != 0 {
                                let mut g = f;
                                let flag = if complete_walls { flags.flag_at(cell) } else { CellFlag::SolidWall };
                                apply_boundary(flag, mask, &flags.wall_velocity_at(cell), desc, &f, &mut g);
                                let mut bits = mask;
                                while bits != 0 {
                                    let i = bits.trailing_zeros() as usize;
                                    bits &= bits - 1;
                                    shared.write(slot(dims, layout, i, cell), g[i]);
                                }
                            }
                        }
                        for i in 0..Q {
                            let line: &[T] = &scr.line[i * nx..(i + 1) * nx];
                            scatter_from_row(&line, &shared, dims, layout, y, z, i, wrap, strategy, &mut scr.shift);
                        }
                        None
                    },
                )
                .flatten()
                .min_by(|a, b| a.0.cmp(&b.0))
        };
        self.macros = macros;
        failure
    }

    /// `f_i(x, y, z)` of the stored populations.
    pub fn population(&self, i: usize, x: usize, y: usize, z: usize) -> T {
        self.field.current()[flatten_index(i, x, y, z, self.dims(), self.field.layout())]
    }
}

fn split_macro_rows<T: Real>(macros: Option<&mut MacroField<T>>, dims: DomainDims) -> Vec<Option<MacroRow<'_, T>>> {
    match macros {
        Some(m) => m.rows_mut(dims.nx).into_iter().map(Some).collect(),
        None => (0..dims.rows()).map(|_| None).collect(),
    }
}
