//! The twelve acceptance checks, runnable one by one or together.
//!
//! Expensive solves are cached in a [`Workbench`], so running every check costs one
//! reference solve per grid level plus the sweeps.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::estimates::{
    caccioppoli_standard_check, caccioppoli_weird_check, convergence_diagnostic,
    energy_estimate_check, gradient_bound_check, moser_ledger, moser_recursion_check,
    slope_control_check, write_csv, CaccioppoliReport, CsvRecord, SlopeMode,
};
use crate::grid::{build_cutoffs, Field, Grid, ParabolicCylinder, SpaceCube};
use crate::lemmas::{self, SuiteConfig, SuiteReport};
use crate::params::ProblemParams;
use crate::scenarios::{heat_final_error, heat_problem, DefaultScenario};
use crate::solver::{epsilon_sweep, solve, CauchyDirichletProblem, SolveResult, SolverConfig};

pub const SPATIAL_ORDER_MIN: f64 = 1.8;
pub const TEMPORAL_ORDER_MIN: f64 = 0.9;
pub const AFFINE_DRIFT_MAX: f64 = 1e-10;
pub const ENERGY_BAND: f64 = 2.0;
pub const MONOTONE_SLACK: f64 = 0.05;
pub const MOSER_STABILITY: f64 = 0.25;
pub const GRADIENT_BAND: f64 = 3.0;
pub const SHRINK_FACTOR: f64 = 1.5;
/// Rounding allowance for the slope control, relative to `|Du|`.
pub const SLOPE_TOL: f64 = 1e-14;

/// Settings of the acceptance experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceConfig {
    pub suites: SuiteConfig,
    pub scenario: DefaultScenario,
    pub solver: SolverConfig,
    pub sweep_epsilons: Vec<f64>,
    /// `(r, R)` pairs for the gradient bound.
    pub radii: Vec<(f64, f64)>,
    /// Exponent `ϑ` used by the gradient bound and the Moser constants; `None` is the default.
    pub theta: Option<f64>,
    pub moser_radii: (f64, f64),
    pub moser_j_max: usize,
    pub ledger_j_max: usize,
    pub caccioppoli_radii: (f64, f64),
    pub caccioppoli_epsilon: f64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            suites: SuiteConfig::default(),
            scenario: DefaultScenario::default(),
            solver: SolverConfig::default(),
            sweep_epsilons: vec![0.1, 0.05, 0.025],
            radii: vec![(0.2, 0.4), (0.25, 0.5), (0.3, 0.6)],
            theta: None,
            moser_radii: (0.3, 0.6),
            moser_j_max: 4,
            ledger_j_max: 6,
            caccioppoli_radii: (0.25, 0.5),
            caccioppoli_epsilon: 0.05,
        }
    }
}

impl AcceptanceConfig {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        self.solver.validate()?;
        self.scenario.validate()?;
        if self.sweep_epsilons.is_empty() {
            return Err(Error::param("sweep_epsilons", "needs at least one value"));
        }
        for &e in &self.sweep_epsilons {
            self.scenario.params(e)?;
        }
        self.scenario.params(self.caccioppoli_epsilon)?;
        let n = self.scenario.n();
        crate::estimates::resolve_theta(n, self.theta)?;
        let (t0, t1) = self.scenario.time_window;
        let half = self.scenario.half_side;
        let p = self.scenario.p;
        let pairs = self
            .radii
            .iter()
            .chain([&self.moser_radii, &self.caccioppoli_radii]);
        for &(r, big_r) in pairs {
            if !(r > 0.0 && r < big_r && big_r <= 1.0) {
                return Err(Error::param("radii", format!("need 0 < r < R <= 1, got ({r}, {big_r})")));
            }
            if big_r > half || big_r.powf(p) > t1 - t0 {
                return Err(Error::param(
                    "radii",
                    format!("cylinder of radius {big_r} does not fit the scenario"),
                ));
            }
        }
        if self.moser_j_max < 1 {
            return Err(Error::param("moser_j_max", "need at least 1"));
        }
        moser_ledger(n, self.moser_j_max.max(self.ledger_j_max))?;
        Ok(())
    }

    fn apex(&self) -> f64 {
        self.scenario.time_window.1
    }

    fn center(&self) -> Vec<f64> {
        vec![0.0; self.scenario.n()]
    }
}

/// Result of one acceptance check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    /// One-line account of the measured values against the thresholds.
    pub summary: String,
    pub metrics: Value,
    /// `(file name, CSV text)` pairs for the detailed tables.
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
}

impl CriterionOutcome {
    fn new(id: u8, title: &str, passed: bool, summary: String, metrics: Value) -> Self {
        CriterionOutcome {
            id,
            title: title.into(),
            passed,
            summary,
            metrics,
            tables: Vec::new(),
        }
    }

    fn failed(id: u8, title: &str, error: impl std::fmt::Display) -> Self {
        Self::new(id, title, false, format!("error: {error}"), json!({ "error": error.to_string() }))
    }

    fn with_table<T: CsvRecord>(mut self, name: &str, rows: &[T]) -> Self {
        let mut buf = Vec::new();
        if write_csv(rows, &mut buf).is_ok() {
            self.tables.push((name.into(), String::from_utf8_lossy(&buf).into_owned()));
        }
        self
    }

    /// `criterion N [title]: PASS|FAIL summary`.
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}]: {} {}",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.summary
        )
    }
}

pub const TITLES: [&str; 12] = [
    "smoothing gap bounds",
    "monotonicity of J and H",
    "ellipticity sandwich",
    "heat-mode convergence",
    "affine stationarity",
    "energy estimate",
    "strong convergence",
    "Moser ledger",
    "Moser recursion",
    "gradient-bound scaling",
    "Caccioppoli refinement",
    "slope control",
];

type Cached<T> = OnceLock<std::result::Result<T, String>>;

fn cached<T>(cell: &Cached<T>, f: impl FnOnce() -> crate::Result<T>) -> std::result::Result<&T, String> {
    cell.get_or_init(|| f().map_err(|e| e.to_string())).as_ref().map_err(Clone::clone)
}

pub struct HeatRuns {
    pub spatial: [SolveResult; 2],
    pub temporal: [SolveResult; 2],
}

/// A reference solve on one grid level with its `ε`-sweep against it.
pub struct Level {
    pub scenario: DefaultScenario,
    pub reference: SolveResult,
}

/// Lazily computed solves shared by the checks.
pub struct Workbench {
    pub config: AcceptanceConfig,
    heat: Cached<HeatRuns>,
    affine: Cached<Vec<SolveResult>>,
    levels: [Cached<Level>; 2],
    sweep: Cached<Vec<SolveResult>>,
    quadratic: Cached<(Level, Vec<SolveResult>)>,
    caccioppoli: [Cached<SolveResult>; 2],
}

impl Workbench {
    pub fn new(config: AcceptanceConfig) -> Self {
        Workbench {
            config,
            heat: OnceLock::new(),
            affine: OnceLock::new(),
            levels: [OnceLock::new(), OnceLock::new()],
            sweep: OnceLock::new(),
            quadratic: OnceLock::new(),
            caccioppoli: [OnceLock::new(), OnceLock::new()],
        }
    }

    fn cfg(&self) -> &SolverConfig {
        &self.config.solver
    }

    fn scenario(&self, fine: bool) -> DefaultScenario {
        if fine {
            self.config.scenario.refined()
        } else {
            self.config.scenario.clone()
        }
    }

    pub fn heat_runs(&self) -> std::result::Result<&HeatRuns, String> {
        cached(&self.heat, || {
            let run = |nodes, t_end, steps| solve(&heat_problem(2, nodes, t_end, steps)?, self.cfg());
            Ok(HeatRuns {
                spatial: [run(9, 0.005, 200)?, run(17, 0.005, 200)?],
                temporal: [run(65, 0.1, 10)?, run(65, 0.1, 20)?],
            })
        })
    }

    pub fn affine_runs(&self) -> std::result::Result<&Vec<SolveResult>, String> {
        cached(&self.affine, || {
            let grid = Grid::new(SpaceCube::new(vec![0.0, 0.0], 1.0)?, 17, (0.0, 0.1), 5)?;
            let data = Field::from_fn(grid, |x, _| 1.7 * x[0] - 0.6 * x[1] + 0.3)?;
            [(3.0, 0.1), (2.0, 0.1)]
                .into_iter()
                .map(|(p, eps)| {
                    let params = ProblemParams::new(p, vec![1.0, 1.0], eps)?;
                    solve(&CauchyDirichletProblem::new(params, data.clone())?, self.cfg())
                })
                .collect()
        })
    }

    pub fn level(&self, fine: bool) -> std::result::Result<&Level, String> {
        cached(&self.levels[fine as usize], || {
            let scenario = self.scenario(fine);
            let reference = scenario.reference_solution(self.cfg())?;
            Ok(Level { scenario, reference })
        })
    }

    fn sweep_of(&self, level: &Level) -> crate::Result<Vec<SolveResult>> {
        let eps = &self.config.sweep_epsilons;
        let template = level.scenario.problem(eps[0], &level.reference.solution)?;
        epsilon_sweep(&template, eps, self.cfg())
            .into_iter()
            .map(|e| e.result)
            .collect()
    }

    /// The coarse-level sweep, ordered by decreasing `ε`.
    pub fn sweep(&self) -> std::result::Result<&Vec<SolveResult>, String> {
        let level = self.level(false)?;
        cached(&self.sweep, || self.sweep_of(level))
    }

    /// The scenario with `p = 2`, its reference and sweep on the coarse level.
    pub fn quadratic(&self) -> std::result::Result<&(Level, Vec<SolveResult>), String> {
        cached(&self.quadratic, || {
            let scenario = DefaultScenario {
                p: 2.0,
                ..self.config.scenario.clone()
            };
            let reference = scenario.reference_solution(self.cfg())?;
            let level = Level { scenario, reference };
            let sweep = self.sweep_of(&level)?;
            Ok((level, sweep))
        })
    }

    /// Solve at the Caccioppoli `ε` on the raw data of one level.
    pub fn caccioppoli_solve(&self, fine: bool) -> std::result::Result<&SolveResult, String> {
        cached(&self.caccioppoli[fine as usize], || {
            let sc = self.scenario(fine);
            solve(&sc.problem(self.config.caccioppoli_epsilon, &sc.data()?)?, self.cfg())
        })
    }

    /// Runs the check with the given number (1 to 12).
    pub fn run(&self, id: u8) -> CriterionOutcome {
        match id {
            1 => self.smoothing_gap(),
            2 => self.monotonicity(),
            3 => self.ellipticity(),
            4 => self.heat_convergence(),
            5 => self.affine_stationarity(),
            6 => self.energy_estimate(),
            7 => self.strong_convergence(),
            8 => self.ledger(),
            9 => self.moser_recursion(),
            10 => self.gradient_bound(),
            11 => self.caccioppoli(),
            12 => self.slope_control(),
            _ => CriterionOutcome::failed(id, "unknown", format!("no criterion {id}")),
        }
    }

    pub fn run_all(&self) -> Vec<CriterionOutcome> {
        (1..=12).map(|id| self.run(id)).collect()
    }

    fn suite_outcome(&self, id: u8, reports: crate::Result<Vec<SuiteReport>>) -> CriterionOutcome {
        let title = TITLES[id as usize - 1];
        match reports {
            Err(e) => CriterionOutcome::failed(id, title, e),
            Ok(reports) => {
                let passed = reports.iter().all(|r| r.passed);
                let summary = reports
                    .iter()
                    .map(|r| format!("{} worst margin {:.3e} (tol {:.0e})", r.name, r.worst_margin(), r.tolerance))
                    .collect::<Vec<_>>()
                    .join("; ");
                CriterionOutcome::new(id, title, passed, summary, json!(reports))
            }
        }
    }

    fn smoothing_gap(&self) -> CriterionOutcome {
        self.suite_outcome(1, lemmas::smoothing_gap_suite(&self.config.suites).map(|r| vec![r]))
    }

    fn monotonicity(&self) -> CriterionOutcome {
        let cfg = &self.config.suites;
        self.suite_outcome(
            2,
            lemmas::monotonicity_suite(cfg)
                .and_then(|a| Ok(vec![a, lemmas::convexity_surrogate_suite(cfg)?])),
        )
    }

    fn ellipticity(&self) -> CriterionOutcome {
        self.suite_outcome(3, lemmas::ellipticity_suite(&self.config.suites).map(|r| vec![r]))
    }

    fn heat_convergence(&self) -> CriterionOutcome {
        let title = TITLES[3];
        let runs = match self.heat_runs() {
            Ok(r) => r,
            Err(e) => return CriterionOutcome::failed(4, title, e),
        };
        let e = |r: &SolveResult| heat_final_error(r);
        let (s0, s1) = (e(&runs.spatial[0]), e(&runs.spatial[1]));
        let (t0, t1) = (e(&runs.temporal[0]), e(&runs.temporal[1]));
        let spatial = (s0 / s1).log2();
        let temporal = (t0 / t1).log2();
        let passed = spatial >= SPATIAL_ORDER_MIN && temporal >= TEMPORAL_ORDER_MIN;
        CriterionOutcome::new(
            4,
            title,
            passed,
            format!(
                "spatial order {spatial:.3} (>= {SPATIAL_ORDER_MIN}), temporal order {temporal:.3} (>= {TEMPORAL_ORDER_MIN})"
            ),
            json!({
                "spatial_errors": [s0, s1], "spatial_order": spatial,
                "temporal_errors": [t0, t1], "temporal_order": temporal,
            }),
        )
    }

    fn affine_stationarity(&self) -> CriterionOutcome {
        let title = TITLES[4];
        let runs = match self.affine_runs() {
            Ok(r) => r,
            Err(e) => return CriterionOutcome::failed(5, title, e),
        };
        let drifts: Vec<f64> = runs
            .iter()
            .map(|r| {
                let u = &r.solution;
                (1..u.grid().slices())
                    .flat_map(|k| u.slice(k).iter().zip(u.slice(k - 1)).map(|(a, b)| (a - b).abs()))
                    .fold(0.0, f64::max)
            })
            .collect();
        let worst = drifts.iter().cloned().fold(0.0, f64::max);
        CriterionOutcome::new(
            5,
            title,
            worst <= AFFINE_DRIFT_MAX,
            format!("max per-step drift {worst:.3e} (<= {AFFINE_DRIFT_MAX:.0e})"),
            json!({ "drifts": drifts }),
        )
    }

    fn energy_estimate(&self) -> CriterionOutcome {
        let title = TITLES[5];
        let run = || -> std::result::Result<CriterionOutcome, String> {
            let level = self.level(false)?;
            let sweep = self.sweep()?;
            let reports = sweep
                .iter()
                .map(|r| energy_estimate_check(r, &level.reference.solution, &r.params))
                .collect::<crate::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            let fits: Vec<f64> = reports.iter().filter_map(|r| r.c_fit).collect();
            let lo = fits.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = fits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let band = hi / lo;
            let passed = fits.len() == reports.len() && lo > 0.0 && band <= ENERGY_BAND;
            Ok(CriterionOutcome::new(
                6,
                title,
                passed,
                format!("c_fit in [{lo:.4}, {hi:.4}], band {band:.3} (<= {ENERGY_BAND})"),
                json!({ "reports": reports }),
            )
            .with_table("energy.csv", &reports))
        };
        run().unwrap_or_else(|e| CriterionOutcome::failed(6, title, e))
    }

    fn strong_convergence(&self) -> CriterionOutcome {
        let title = TITLES[6];
        let run = || -> std::result::Result<CriterionOutcome, String> {
            let level = self.level(false)?;
            let sweep = self.sweep()?;
            let (quad_level, quad_sweep) = self.quadratic()?;
            let table = |lvl: &Level, runs: &[SolveResult]| {
                let refs: Vec<&SolveResult> = runs.iter().collect();
                let params = lvl.scenario.params(lvl.scenario.reference_epsilon)?;
                convergence_diagnostic(&refs, &lvl.reference.solution, &params)
            };
            let h_gap = table(level, sweep).map_err(|e| e.to_string())?;
            let k_gap = table(quad_level, quad_sweep).map_err(|e| e.to_string())?;
            let passed = h_gap.is_decreasing(MONOTONE_SLACK) && k_gap.is_decreasing(MONOTONE_SLACK);
            let show = |t: &crate::estimates::ConvergenceTable| {
                (0..self.config.scenario.n())
                    .map(|j| format!("{:.3e}", t.component(j).iter().cloned().fold(0.0, f64::max)))
                    .collect::<Vec<_>>()
                    .join("/")
            };
            let last = |t: &crate::estimates::ConvergenceTable| {
                (0..self.config.scenario.n())
                    .map(|j| format!("{:.3e}", t.component(j).last().copied().unwrap_or(f64::NAN)))
                    .collect::<Vec<_>>()
                    .join("/")
            };
            let mut rows = h_gap.rows.clone();
            rows.extend(k_gap.rows.iter().cloned());
            Ok(CriterionOutcome::new(
                7,
                title,
                passed,
                format!(
                    "H-gap {} -> {}, K-vs-H gap {} -> {} (monotone within {:.0}%)",
                    show(&h_gap),
                    last(&h_gap),
                    show(&k_gap),
                    last(&k_gap),
                    MONOTONE_SLACK * 100.0
                ),
                json!({ "h_gap": h_gap, "k_vs_h_gap": k_gap }),
            )
            .with_table("convergence.csv", &rows))
        };
        run().unwrap_or_else(|e| CriterionOutcome::failed(7, title, e))
    }

    fn ledger(&self) -> CriterionOutcome {
        let title = TITLES[7];
        let mut checked = Vec::new();
        let mut tables = Vec::new();
        for n in 2..=4 {
            match moser_ledger(n, self.config.ledger_j_max) {
                Ok(l) => {
                    checked.push((n, l.identities_hold()));
                    tables.push((format!("ledger_n{n}.csv"), l.to_csv()));
                }
                Err(e) => return CriterionOutcome::failed(8, title, e),
            }
        }
        let passed = checked.iter().all(|c| c.1);
        let mut out = CriterionOutcome::new(
            8,
            title,
            passed,
            format!(
                "exact identities for n in 2..=4, j <= {}: {}",
                self.config.ledger_j_max,
                checked
                    .iter()
                    .map(|(n, ok)| format!("n={n} {}", if *ok { "ok" } else { "broken" }))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            json!({ "checked": checked }),
        );
        out.tables = tables;
        out
    }

    fn moser_recursion(&self) -> CriterionOutcome {
        let title = TITLES[8];
        let run = || -> std::result::Result<CriterionOutcome, String> {
            let (r, big_r) = self.config.moser_radii;
            let j_max = self.config.moser_j_max;
            let mut reports = Vec::new();
            for fine in [false, true] {
                let level = self.level(fine)?;
                let params = level.scenario.params(level.scenario.reference_epsilon).map_err(|e| e.to_string())?;
                let ledger = moser_ledger(params.n(), j_max).map_err(|e| e.to_string())?;
                let outer = ParabolicCylinder::new(
                    SpaceCube::new(self.config.center(), big_r).map_err(|e| e.to_string())?,
                    self.config.apex(),
                    params.p(),
                )
                .map_err(|e| e.to_string())?;
                reports.push(
                    moser_recursion_check(&level.reference, &outer, r, &ledger, &params, j_max, self.config.theta)
                        .map_err(|e| e.to_string())?,
                );
            }
            let (a, b) = (reports[0].max_c, reports[1].max_c);
            let change = (b - a).abs() / a;
            let finite = reports.iter().all(|r| r.is_finite());
            let passed = finite && a > 0.0 && change <= MOSER_STABILITY;
            Ok(CriterionOutcome::new(
                9,
                title,
                passed,
                format!(
                    "max C_j {a:.4e} -> {b:.4e} under refinement, change {:.2}% (<= {:.0}%)",
                    change * 100.0,
                    MOSER_STABILITY * 100.0
                ),
                json!({ "reports": reports }),
            )
            .with_table("moser_recursion.csv", &reports))
        };
        run().unwrap_or_else(|e| CriterionOutcome::failed(9, title, e))
    }

    fn gradient_bound(&self) -> CriterionOutcome {
        let title = TITLES[9];
        let run = || -> std::result::Result<CriterionOutcome, String> {
            let level = self.level(false)?;
            let sweep = self.sweep()?;
            let params = level.scenario.params(level.scenario.reference_epsilon).map_err(|e| e.to_string())?;
            let per_eps = sweep
                .iter()
                .map(|r| {
                    gradient_bound_check(
                        &r.solution,
                        &self.config.center(),
                        self.config.apex(),
                        &self.config.radii,
                        &params,
                        self.config.theta,
                    )
                })
                .collect::<crate::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            let mut worst_band: f64 = 1.0;
            let mut bands = Vec::new();
            for (i, pair) in self.config.radii.iter().enumerate() {
                let fits: Vec<f64> = per_eps.iter().map(|reps| reps[i].c_fit).collect();
                let lo = fits.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = fits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let band = if lo > 0.0 { hi / lo } else { f64::INFINITY };
                worst_band = worst_band.max(band);
                bands.push(json!({ "radii": pair, "c_fit": fits, "band": band }));
            }
            let all: Vec<f64> = per_eps.iter().flatten().map(|r| r.c_fit).collect();
            let spread = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                / all.iter().cloned().fold(f64::INFINITY, f64::min);
            let finite = all.iter().all(|v| v.is_finite());
            let passed = finite && worst_band <= GRADIENT_BAND;
            let rows: Vec<_> = per_eps.iter().flatten().cloned().collect();
            Ok(CriterionOutcome::new(
                10,
                title,
                passed,
                format!(
                    "worst band across epsilon {worst_band:.3} (<= {GRADIENT_BAND}); spread across radii {spread:.2} (informational)"
                ),
                json!({ "epsilons": self.config.sweep_epsilons, "bands": bands, "radii_spread": spread }),
            )
            .with_table("gradient_bound.csv", &rows))
        };
        run().unwrap_or_else(|e| CriterionOutcome::failed(10, title, e))
    }

    fn caccioppoli_pair(&self, fine: bool) -> std::result::Result<Vec<CaccioppoliReport>, String> {
        let result = self.caccioppoli_solve(fine)?;
        let (r, big_r) = self.config.caccioppoli_radii;
        let tau = self.config.apex();
        let cut = build_cutoffs(r, big_r, &self.config.center(), tau, result.params.p(), result.grid())
            .map_err(|e| e.to_string())?;
        let n = result.grid().n();
        let mut out = Vec::new();
        for j in 0..n {
            out.push(caccioppoli_standard_check(result, &cut, 1, j, tau).map_err(|e| e.to_string())?);
        }
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    out.push(
                        caccioppoli_weird_check(result, &cut, 1.0, 3.0, None, j, k, tau)
                            .map_err(|e| e.to_string())?,
                    );
                }
            }
        }
        Ok(out)
    }

    fn caccioppoli(&self) -> CriterionOutcome {
        let title = TITLES[10];
        let run = || -> std::result::Result<CriterionOutcome, String> {
            let coarse = self.caccioppoli_pair(false)?;
            let fine = self.caccioppoli_pair(true)?;
            let mut passed = true;
            let mut worst_coarse: f64 = 0.0;
            let mut worst_fine: f64 = 0.0;
            let mut min_rel: f64 = f64::INFINITY;
            for (a, b) in coarse.iter().zip(&fine) {
                let (va, vb) = (a.violation(), b.violation());
                worst_coarse = worst_coarse.max(va);
                worst_fine = worst_fine.max(vb);
                if vb > 0.0 && vb * SHRINK_FACTOR > va {
                    passed = false;
                }
                min_rel = min_rel.min(b.slack / b.rhs.abs().max(f64::MIN_POSITIVE));
            }
            let mut rows = coarse.clone();
            rows.extend(fine.iter().cloned());
            Ok(CriterionOutcome::new(
                11,
                title,
                passed,
                format!(
                    "worst negative slack {worst_coarse:.3e} -> {worst_fine:.3e} (shrink >= {SHRINK_FACTOR}x when present); min relative slack on fine level {min_rel:.3}"
                ),
                json!({ "coarse": coarse, "fine": fine }),
            )
            .with_table("caccioppoli.csv", &rows))
        };
        run().unwrap_or_else(|e| CriterionOutcome::failed(11, title, e))
    }

    fn slope_control(&self) -> CriterionOutcome {
        let title = TITLES[11];
        let run = || -> std::result::Result<CriterionOutcome, String> {
            let mut fields: Vec<(&str, &SolveResult)> = Vec::new();
            let heat = self.heat_runs()?;
            fields.extend(heat.spatial.iter().chain(&heat.temporal).map(|r| ("heat", r)));
            fields.extend(self.affine_runs()?.iter().map(|r| ("affine", r)));
            fields.push(("reference", &self.level(false)?.reference));
            fields.push(("reference_fine", &self.level(true)?.reference));
            fields.extend(self.sweep()?.iter().map(|r| ("sweep", r)));
            let (quad_level, quad_sweep) = self.quadratic()?;
            fields.push(("quadratic_reference", &quad_level.reference));
            fields.extend(quad_sweep.iter().map(|r| ("quadratic_sweep", r)));
            let mut worst = f64::NEG_INFINITY;
            for (_, r) in &fields {
                for mode in [SlopeMode::U, SlopeMode::V] {
                    let v = slope_control_check(&r.solution, &r.params, mode).map_err(|e| e.to_string())?;
                    worst = worst.max(v);
                }
            }
            Ok(CriterionOutcome::new(
                12,
                title,
                worst <= SLOPE_TOL,
                format!(
                    "{} fields, both normalizations, worst relative violation {worst:.3e} (<= {SLOPE_TOL:.0e})",
                    fields.len()
                ),
                json!({ "fields": fields.len(), "worst_violation": worst }),
            ))
        };
        run().unwrap_or_else(|e| CriterionOutcome::failed(12, title, e))
    }
}

/// Criteria selected by a subcommand of the command-line runner.
pub fn criteria_for(suite: &str) -> Option<&'static [u8]> {
    Some(match suite {
        "verify-lemmas" => &[1, 2, 3],
        "verify-energy" => &[6],
        "sweep" => &[7],
        "verify-caccioppoli" => &[11],
        "verify-gradient-bound" => &[10],
        "moser" => &[8, 9],
        "all" => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        AcceptanceConfig::default().validate().unwrap();
        let bad = AcceptanceConfig {
            radii: vec![(0.5, 0.4)],
            ..AcceptanceConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ledger_check_is_cheap_and_passes() {
        let bench = Workbench::new(AcceptanceConfig::default());
        let out = bench.run(8);
        assert!(out.passed, "{}", out.line());
        assert_eq!(out.tables.len(), 3);
    }
}
