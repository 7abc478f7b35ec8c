//! The integer program: variable registry, tagged constraint rows and the
//! objective, plus an evaluator that checks a plan against every row.
//!
//! Assignment binaries exist only for (task, unit) pairs where the unit's
//! type appears in some minimal covering team of the task. Robot
//! no-overlap is kept as one global row per unit over the optional
//! intervals `(x_ir, t^s_ir, t^e_ir)` instead of pairwise ordering
//! binaries; the start/end linking of a pair is an indicator equality.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::model::{
    validate_instance, Minutes, ObjectiveWeights, Plan, ProblemInstance, RobotUnit,
    ValidationReport,
};

use super::teams::{minimal_teams, TeamSpec};
use super::SolverError;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarFamily {
    /// `x_ir`
    Assignment,
    /// `t^s_i`
    TaskStart,
    /// `t^e_i`
    TaskEnd,
    /// `t^s_ir`
    RobotStart,
    /// `t^e_ir`
    RobotEnd,
    /// `y_ij` for a conflict pair.
    ConflictOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Variable {
    pub name: String,
    pub family: VarFamily,
    pub lower: i64,
    pub upper: i64,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        matches!(self.family, VarFamily::Assignment | VarFamily::ConflictOrder)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    Dependency,
    Capability,
    Linking,
    NoOverlap,
    Window,
    Conflict,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 6] = [
        ConstraintFamily::Dependency,
        ConstraintFamily::Capability,
        ConstraintFamily::Linking,
        ConstraintFamily::NoOverlap,
        ConstraintFamily::Window,
        ConstraintFamily::Conflict,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ConstraintFamily::Dependency => "dependency",
            ConstraintFamily::Capability => "capability",
            ConstraintFamily::Linking => "linking",
            ConstraintFamily::NoOverlap => "no_overlap",
            ConstraintFamily::Window => "window",
            ConstraintFamily::Conflict => "conflict",
        }
    }
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Sense {
    fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Sense::Le => lhs <= rhs,
            Sense::Ge => lhs >= rhs,
            Sense::Eq => lhs == rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinearExpr {
    pub terms: Vec<(VarId, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

impl LinearExpr {
    fn lhs(&self, values: &[i64]) -> i64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RowKind {
    Linear(LinearExpr),
    /// The linear part must hold whenever the binary is 1.
    Indicator { binary: VarId, expr: LinearExpr },
    /// Intervals `[start, end)` whose presence binary is 1 pairwise do not
    /// overlap.
    NoOverlap { intervals: Vec<(VarId, VarId, VarId)> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Constraint {
    pub family: ConstraintFamily,
    pub name: String,
    pub row: RowKind,
}

/// `weight * |var - target|`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Deviation {
    pub var: VarId,
    pub target: i64,
    pub weight: i64,
}

/// `makespan_weight * max(makespan vars) + Σ linear + Σ deviations + constant`
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Objective {
    pub makespan_weight: i64,
    pub makespan_over: Vec<VarId>,
    pub linear: Vec<(VarId, i64)>,
    pub deviations: Vec<Deviation>,
    pub constant: i64,
}

/// Frozen history and reference plan of a replanning program.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplanSetup {
    pub at: Minutes,
    pub original: Plan,
    /// Tasks started no later than `at` in the original plan.
    pub frozen: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FamilyCount {
    pub family: ConstraintFamily,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgramSize {
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
    pub by_family: Vec<FamilyCount>,
}

/// One row (or bound) a plan fails, with its instantiated values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowViolation {
    pub family: Option<ConstraintFamily>,
    pub name: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegerProgram {
    pub instance: ProblemInstance,
    pub units: Vec<RobotUnit>,
    /// Minimal covering teams per task, in task order.
    pub teams: Vec<Vec<TeamSpec>>,
    pub horizon: Minutes,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
    pub replan: Option<ReplanSetup>,
    assignment: HashMap<(usize, usize), VarId>,
    task_start: Vec<VarId>,
    task_end: Vec<VarId>,
}

/// Builds the scheduling program for a validated instance.
pub fn build_program(instance: &ProblemInstance) -> Result<IntegerProgram, SolverError> {
    let report = validate_instance(instance);
    if !report.is_empty() {
        return Err(SolverError::InstanceInvalid(report));
    }
    Ok(Builder::new(instance.clone(), instance.horizon()).finish(None))
}

/// Builds the replanning program: the instance's constraints, frozen
/// history pinned through variable bounds, future tasks bounded below by
/// the replanning time and deviation terms against the original plan.
pub(crate) fn build_replan_program(
    instance: &ProblemInstance,
    horizon: Minutes,
    setup: ReplanSetup,
) -> Result<IntegerProgram, SolverError> {
    let report = validate_instance(instance);
    if !report.is_empty() {
        return Err(SolverError::InstanceInvalid(report));
    }
    Ok(Builder::new(instance.clone(), horizon).finish(Some(setup)))
}

struct Builder {
    instance: ProblemInstance,
    units: Vec<RobotUnit>,
    teams: Vec<Vec<TeamSpec>>,
    horizon: Minutes,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    assignment: HashMap<(usize, usize), VarId>,
    robot_times: HashMap<(usize, usize), (VarId, VarId)>,
    task_start: Vec<VarId>,
    task_end: Vec<VarId>,
}

impl Builder {
    fn new(instance: ProblemInstance, horizon: Minutes) -> Self {
        let units = instance.robot_units();
        let teams = instance
            .tasks
            .iter()
            .map(|t| minimal_teams(&instance, t))
            .collect();
        Self {
            instance,
            units,
            teams,
            horizon,
            variables: Vec::new(),
            constraints: Vec::new(),
            assignment: HashMap::new(),
            robot_times: HashMap::new(),
            task_start: Vec::new(),
            task_end: Vec::new(),
        }
    }

    fn var(&mut self, name: String, family: VarFamily, lower: i64, upper: i64) -> VarId {
        self.variables.push(Variable { name, family, lower, upper });
        self.variables.len() - 1
    }

    fn row(&mut self, family: ConstraintFamily, name: String, row: RowKind) {
        self.constraints.push(Constraint { family, name, row });
    }

    fn finish(mut self, replan: Option<ReplanSetup>) -> IntegerProgram {
        let h = self.horizon;
        let n = self.instance.tasks.len();

        for i in 0..n {
            let id = self.instance.tasks[i].id.clone();
            for r in 0..self.units.len() {
                let ty = self.units[r].type_index;
                if self.teams[i].iter().any(|t| t.uses_type(ty)) {
                    let name = format!("x[{id},{}]", self.units[r].id);
                    let v = self.var(name, VarFamily::Assignment, 0, 1);
                    self.assignment.insert((i, r), v);
                }
            }
        }
        for i in 0..n {
            let id = self.instance.tasks[i].id.clone();
            let s = self.var(format!("ts[{id}]"), VarFamily::TaskStart, 0, h);
            let e = self.var(format!("te[{id}]"), VarFamily::TaskEnd, 0, h);
            self.task_start.push(s);
            self.task_end.push(e);
        }
        let mut pairs: Vec<(usize, usize)> = self.assignment.keys().copied().collect();
        pairs.sort_unstable();
        for &(i, r) in &pairs {
            let tag = format!("{},{}", self.instance.tasks[i].id, self.units[r].id);
            let s = self.var(format!("ts[{tag}]"), VarFamily::RobotStart, 0, h);
            let e = self.var(format!("te[{tag}]"), VarFamily::RobotEnd, 0, h);
            self.robot_times.insert((i, r), (s, e));
        }

        self.dependency_rows();
        self.capability_rows();
        self.linking_rows(&pairs);
        self.no_overlap_rows(&pairs);
        self.window_rows();
        self.conflict_rows();

        let weights = self.instance.weights;
        let mut objective = Objective {
            makespan_weight: weights.makespan,
            makespan_over: self.task_end.clone(),
            linear: self
                .task_end
                .iter()
                .map(|&v| (v, weights.completion))
                .chain(pairs.iter().map(|p| (self.assignment[p], weights.robots)))
                .collect(),
            deviations: Vec::new(),
            constant: 0,
        };
        if let Some(setup) = &replan {
            self.apply_replan(setup, &weights, &mut objective);
        }

        IntegerProgram {
            instance: self.instance,
            units: self.units,
            teams: self.teams,
            horizon: h,
            variables: self.variables,
            constraints: self.constraints,
            objective,
            replan,
            assignment: self.assignment,
            task_start: self.task_start,
            task_end: self.task_end,
        }
    }

    fn dependency_rows(&mut self) {
        for (i, task) in self.instance.tasks.iter().enumerate() {
            for p in &task.predecessors {
                let j = self.instance.task_index(p).expect("validated predecessor");
                self.constraints.push(Constraint {
                    family: ConstraintFamily::Dependency,
                    name: format!("{p} before {}", task.id),
                    row: RowKind::Linear(LinearExpr {
                        terms: vec![(self.task_start[i], 1), (self.task_end[j], -1)],
                        sense: Sense::Ge,
                        rhs: 0,
                    }),
                });
            }
        }
    }

    fn capability_rows(&mut self) {
        for (i, task) in self.instance.tasks.iter().enumerate() {
            let qualified: Vec<usize> = (0..self.units.len())
                .filter(|r| self.assignment.contains_key(&(i, *r)))
                .collect();
            let mut any = false;
            for (k, &need) in task.requirements.iter().enumerate() {
                if need == 0 {
                    continue;
                }
                any = true;
                let terms = qualified
                    .iter()
                    .map(|&r| {
                        let a = self.instance.robot_types[self.units[r].type_index].capabilities[k];
                        (self.assignment[&(i, r)], i64::from(a))
                    })
                    .filter(|&(_, a)| a > 0)
                    .collect();
                self.constraints.push(Constraint {
                    family: ConstraintFamily::Capability,
                    name: format!("{} needs {}", task.id, self.instance.capabilities[k].name),
                    row: RowKind::Linear(LinearExpr {
                        terms,
                        sense: Sense::Ge,
                        rhs: i64::from(need),
                    }),
                });
            }
            if !any {
                let terms = qualified.iter().map(|&r| (self.assignment[&(i, r)], 1)).collect();
                self.constraints.push(Constraint {
                    family: ConstraintFamily::Capability,
                    name: format!("{} needs a robot", task.id),
                    row: RowKind::Linear(LinearExpr { terms, sense: Sense::Ge, rhs: 1 }),
                });
            }
        }
    }

    fn linking_rows(&mut self, pairs: &[(usize, usize)]) {
        for i in 0..self.instance.tasks.len() {
            let task = &self.instance.tasks[i];
            let (id, d) = (task.id.clone(), task.duration);
            self.row(
                ConstraintFamily::Linking,
                format!("duration {id}"),
                RowKind::Linear(LinearExpr {
                    terms: vec![(self.task_end[i], 1), (self.task_start[i], -1)],
                    sense: Sense::Eq,
                    rhs: d,
                }),
            );
        }
        for &(i, r) in pairs {
            let x = self.assignment[&(i, r)];
            let (s, e) = self.robot_times[&(i, r)];
            let tag = format!("{},{}", self.instance.tasks[i].id, self.units[r].id);
            for (local, global, what) in [(s, self.task_start[i], "start"), (e, self.task_end[i], "end")] {
                self.row(
                    ConstraintFamily::Linking,
                    format!("{what} {tag}"),
                    RowKind::Indicator {
                        binary: x,
                        expr: LinearExpr {
                            terms: vec![(local, 1), (global, -1)],
                            sense: Sense::Eq,
                            rhs: 0,
                        },
                    },
                );
            }
        }
    }

    fn no_overlap_rows(&mut self, pairs: &[(usize, usize)]) {
        for r in 0..self.units.len() {
            let intervals: Vec<_> = pairs
                .iter()
                .filter(|p| p.1 == r)
                .map(|p| {
                    let (s, e) = self.robot_times[p];
                    (self.assignment[p], s, e)
                })
                .collect();
            if intervals.is_empty() {
                continue;
            }
            let name = format!("unit {}", self.units[r].id);
            self.row(ConstraintFamily::NoOverlap, name, RowKind::NoOverlap { intervals });
        }
    }

    fn window_rows(&mut self) {
        for i in 0..self.instance.tasks.len() {
            let Some(w) = self.instance.tasks[i].window else {
                continue;
            };
            let id = self.instance.tasks[i].id.clone();
            let start = self.task_start[i];
            let end = self.task_end[i];
            self.row(
                ConstraintFamily::Window,
                format!("{id} not before {}", w.earliest_start),
                RowKind::Linear(LinearExpr { terms: vec![(start, 1)], sense: Sense::Ge, rhs: w.earliest_start }),
            );
            if let Some(latest) = w.latest_end {
                self.row(
                    ConstraintFamily::Window,
                    format!("{id} done by {latest}"),
                    RowKind::Linear(LinearExpr { terms: vec![(end, 1)], sense: Sense::Le, rhs: latest }),
                );
            }
        }
    }

    fn conflict_rows(&mut self) {
        let big_m = self.horizon;
        let mut seen = Vec::new();
        for (a, b) in self.instance.conflicts.clone() {
            let i = self.instance.task_index(&a).expect("validated conflict");
            let j = self.instance.task_index(&b).expect("validated conflict");
            let key = (i.min(j), i.max(j));
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            let (i, j) = key;
            let (ai, bj) = (self.instance.tasks[i].id.clone(), self.instance.tasks[j].id.clone());
            let y = self.var(format!("y[{ai},{bj}]"), VarFamily::ConflictOrder, 0, 1);
            // y = 1: i before j; y = 0: j before i.
            self.row(
                ConstraintFamily::Conflict,
                format!("{ai} before {bj} if y"),
                RowKind::Linear(LinearExpr {
                    terms: vec![(self.task_end[i], 1), (self.task_start[j], -1), (y, big_m)],
                    sense: Sense::Le,
                    rhs: big_m,
                }),
            );
            self.row(
                ConstraintFamily::Conflict,
                format!("{bj} before {ai} unless y"),
                RowKind::Linear(LinearExpr {
                    terms: vec![(self.task_end[j], 1), (self.task_start[i], -1), (y, -big_m)],
                    sense: Sense::Le,
                    rhs: 0,
                }),
            );
        }
    }

    fn apply_replan(&mut self, setup: &ReplanSetup, weights: &ObjectiveWeights, objective: &mut Objective) {
        for (i, task) in self.instance.tasks.iter().enumerate() {
            let Some(orig) = setup.original.entry(&task.id) else {
                continue;
            };
            let frozen = setup.frozen.contains(&task.id);
            if frozen {
                for (v, value) in [(self.task_start[i], orig.start), (self.task_end[i], orig.end)] {
                    self.variables[v].lower = value;
                    self.variables[v].upper = value;
                }
            } else {
                let s = self.task_start[i];
                self.variables[s].lower = self.variables[s].lower.max(setup.at);
                for (v, target) in [(self.task_start[i], orig.start), (self.task_end[i], orig.end)] {
                    objective.deviations.push(Deviation { var: v, target, weight: weights.retiming });
                }
            }
            for (r, unit) in self.units.iter().enumerate() {
                let was = orig.robots.contains(&unit.id);
                match self.assignment.get(&(i, r)) {
                    Some(&x) if frozen => {
                        let v = i64::from(was);
                        self.variables[x].lower = v;
                        self.variables[x].upper = v;
                    }
                    Some(&x) => objective.deviations.push(Deviation {
                        var: x,
                        target: i64::from(was),
                        weight: weights.reassignment,
                    }),
                    None => {}
                }
            }
            if !frozen {
                // Units of the original team that no longer exist or no
                // longer qualify contribute a fixed reassignment.
                let missing = orig
                    .robots
                    .iter()
                    .filter(|u| {
                        !self
                            .units
                            .iter()
                            .enumerate()
                            .any(|(r, unit)| unit.id == **u && self.assignment.contains_key(&(i, r)))
                    })
                    .count() as i64;
                objective.constant += missing * weights.reassignment;
            }
        }
    }
}

impl IntegerProgram {
    pub fn size(&self) -> ProgramSize {
        ProgramSize {
            variables: self.variables.len(),
            binaries: self.variables.iter().filter(|v| v.is_binary()).count(),
            constraints: self.constraints.len(),
            by_family: ConstraintFamily::ALL
                .iter()
                .map(|&family| FamilyCount {
                    family,
                    rows: self.constraints.iter().filter(|c| c.family == family).count(),
                })
                .collect(),
        }
    }

    pub fn count(&self, family: ConstraintFamily) -> usize {
        self.constraints.iter().filter(|c| c.family == family).count()
    }

    pub fn count_vars(&self, family: VarFamily) -> usize {
        self.variables.iter().filter(|v| v.family == family).count()
    }

    pub fn assignment_var(&self, task: usize, unit: usize) -> Option<VarId> {
        self.assignment.get(&(task, unit)).copied()
    }

    pub fn is_replan(&self) -> bool {
        self.replan.is_some()
    }

    /// Values of every variable under a plan. Robot-specific times of
    /// unassigned pairs are set to 0; conflict binaries follow the plan's
    /// order. Fails if the plan names an unknown task or unit.
    pub fn assign_values(&self, plan: &Plan) -> Result<Vec<i64>, String> {
        let mut values = vec![0i64; self.variables.len()];
        let mut seen = vec![false; self.instance.tasks.len()];
        for entry in &plan.entries {
            let i = self
                .instance
                .task_index(&entry.task)
                .ok_or_else(|| format!("plan names unknown task `{}`", entry.task))?;
            seen[i] = true;
            values[self.task_start[i]] = entry.start;
            values[self.task_end[i]] = entry.end;
            for robot in &entry.robots {
                let r = self
                    .units
                    .iter()
                    .position(|u| u.id == *robot)
                    .ok_or_else(|| format!("plan names unknown robot `{robot}`"))?;
                let x = self
                    .assignment_var(i, r)
                    .ok_or_else(|| format!("`{robot}` cannot contribute to `{}`", entry.task))?;
                values[x] = 1;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(format!("plan has no entry for `{}`", self.instance.tasks[i].id));
        }
        for c in &self.constraints {
            if let RowKind::Indicator { binary, expr } = &c.row {
                if values[*binary] == 1 {
                    let (local, global) = (expr.terms[0].0, expr.terms[1].0);
                    values[local] = values[global];
                }
            }
        }
        for c in &self.constraints {
            if c.family != ConstraintFamily::Conflict {
                continue;
            }
            if let RowKind::Linear(expr) = &c.row {
                // The `i before j if y` row: pick y = 1 when it holds.
                if let Some(&(y, _)) = expr.terms.iter().find(|&&(_, m)| m > 1) {
                    let end_i = values[expr.terms[0].0];
                    let start_j = values[expr.terms[1].0];
                    values[y] = i64::from(end_i <= start_j);
                }
            }
        }
        Ok(values)
    }

    /// Objective value of a full variable assignment.
    pub fn objective_value(&self, values: &[i64]) -> i64 {
        let o = &self.objective;
        let makespan = o.makespan_over.iter().map(|&v| values[v]).max().unwrap_or(0);
        o.makespan_weight * makespan
            + o.linear.iter().map(|&(v, c)| c * values[v]).sum::<i64>()
            + o.deviations
                .iter()
                .map(|d| d.weight * (values[d.var] - d.target).abs())
                .sum::<i64>()
            + o.constant
    }

    /// Checks a plan against every bound and row. Returns the objective
    /// value when all hold.
    pub fn evaluate(&self, plan: &Plan) -> Result<i64, Vec<RowViolation>> {
        let values = self.assign_values(plan).map_err(|detail| {
            vec![RowViolation { family: None, name: "plan".into(), detail }]
        })?;
        let mut out = Vec::new();
        for (v, var) in self.variables.iter().enumerate() {
            if values[v] < var.lower || values[v] > var.upper {
                out.push(RowViolation {
                    family: None,
                    name: var.name.clone(),
                    detail: format!("{} = {} outside [{}, {}]", var.name, values[v], var.lower, var.upper),
                });
            }
        }
        for c in &self.constraints {
            if let Some(detail) = self.check_row(&c.row, &values) {
                out.push(RowViolation { family: Some(c.family), name: c.name.clone(), detail });
            }
        }
        if out.is_empty() {
            Ok(self.objective_value(&values))
        } else {
            Err(out)
        }
    }

    fn render(&self, expr: &LinearExpr, values: &[i64]) -> String {
        let terms: Vec<String> = expr
            .terms
            .iter()
            .map(|&(v, c)| format!("{c}*{}({})", self.variables[v].name, values[v]))
            .collect();
        format!("{} = {} {} {}", terms.join(" + "), expr.lhs(values), expr.sense.symbol(), expr.rhs)
    }

    fn check_row(&self, row: &RowKind, values: &[i64]) -> Option<String> {
        match row {
            RowKind::Linear(expr) => {
                (!expr.sense.holds(expr.lhs(values), expr.rhs)).then(|| self.render(expr, values))
            }
            RowKind::Indicator { binary, expr } => (values[*binary] == 1
                && !expr.sense.holds(expr.lhs(values), expr.rhs))
            .then(|| format!("{} = 1 but {}", self.variables[*binary].name, self.render(expr, values))),
            RowKind::NoOverlap { intervals } => {
                let mut active: Vec<(i64, i64, VarId)> = intervals
                    .iter()
                    .filter(|&&(x, _, _)| values[x] == 1)
                    .map(|&(x, s, e)| (values[s], values[e], x))
                    .collect();
                active.sort_unstable();
                active.windows(2).find(|w| w[1].0 < w[0].1).map(|w| {
                    format!(
                        "{} [{}, {}) overlaps {} [{}, {})",
                        self.variables[w[0].2].name, w[0].0, w[0].1, self.variables[w[1].2].name, w[1].0, w[1].1
                    )
                })
            }
        }
    }
}

impl From<ValidationReport> for SolverError {
    fn from(report: ValidationReport) -> Self {
        SolverError::InstanceInvalid(report)
    }
}
