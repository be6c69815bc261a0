use super::ast::{Builtin, Expr, ProgressProgram};
use super::builtins;
use super::schema::{EnvFeatures, SemType, Value};
use super::ProgressReport;
use crate::grid::GridPos;

/// Raised only when a state does not conform to the schema the program was
/// checked against.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("state is missing feature `{0}`")]
    MissingFeature(String),
    #[error("feature `{name}` has type {found}, program expects {expected}")]
    FeatureType { name: String, expected: SemType, found: SemType },
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Rounds an integer-valued argument; negative means "no filter".
fn code_arg(v: f64) -> Option<u8> {
    let r = v.round();
    (r >= 0.0 && r <= u8::MAX as f64).then_some(r as u8)
}

impl ProgressProgram {
    /// Evaluate every subtask on `state`. Non-finite scalars are replaced by
    /// zero wherever they arise, so the report is always finite.
    pub fn evaluate(&self, state: &EnvFeatures) -> Result<ProgressReport, EvalError> {
        let mut values = Vec::with_capacity(self.subtasks.len());
        for s in &self.subtasks {
            match eval(&s.expr, state)? {
                Value::Scalar(v) => values.push(sanitize(v)),
                other => unreachable!("type-checked subtask evaluated to {:?}", other.sem_type()),
            }
        }
        Ok(ProgressReport::new(values, self.directions()))
    }
}

fn feature<'a>(state: &'a EnvFeatures, name: &str) -> Result<&'a Value, EvalError> {
    state.get(name).ok_or_else(|| EvalError::MissingFeature(name.to_string()))
}

fn eval(expr: &Expr, state: &EnvFeatures) -> Result<Value, EvalError> {
    Ok(match expr {
        Expr::Const(v) => Value::Scalar(*v),
        Expr::Feature(name) => feature(state, name)?.clone(),
        Expr::Binary { op, lhs, rhs } => {
            let a = scalar(eval(lhs, state)?);
            let b = scalar(eval(rhs, state)?);
            Value::Scalar(sanitize(op.apply(a, b)))
        }
        Expr::Mean(args) => {
            let mut sum = 0.0;
            for a in args {
                sum += scalar(eval(a, state)?);
            }
            Value::Scalar(sanitize(sum / args.len() as f64))
        }
        Expr::Call { func, args } => {
            let vals = args.iter().map(|a| eval(a, state)).collect::<Result<Vec<_>, _>>()?;
            call(*func, vals, state)?
        }
    })
}

fn scalar(v: Value) -> f64 {
    match v {
        Value::Scalar(x) => x,
        other => unreachable!("expected scalar, got {:?}", other.sem_type()),
    }
}

fn vec3(v: &Value) -> [f64; 3] {
    match v {
        Value::Vec3(x) => *x,
        other => unreachable!("expected Vec3, got {:?}", other.sem_type()),
    }
}

fn quat(v: &Value) -> [f64; 4] {
    match v {
        Value::Quat(x) => *x,
        other => unreachable!("expected Quat, got {:?}", other.sem_type()),
    }
}

fn pos(v: &Value) -> Option<GridPos> {
    match v {
        Value::Pos(p) => *p,
        other => unreachable!("expected GridPos, got {:?}", other.sem_type()),
    }
}

fn call(func: Builtin, args: Vec<Value>, state: &EnvFeatures) -> Result<Value, EvalError> {
    let grid_arg = |v: &Value| match v {
        Value::Grid(g) => g.clone(),
        other => unreachable!("expected Grid, got {:?}", other.sem_type()),
    };
    let opt_code = |i: usize| args.get(i).map(|v| scalar(v.clone())).and_then(code_arg);

    Ok(match func {
        Builtin::Dist => Value::Scalar(sanitize(builtins::dist(vec3(&args[0]), vec3(&args[1])))),
        Builtin::GoalDist => {
            let goal = match feature(state, "goal_pos")? {
                Value::Vec3(g) => *g,
                other => {
                    return Err(EvalError::FeatureType {
                        name: "goal_pos".into(),
                        expected: SemType::Vec3,
                        found: other.sem_type(),
                    })
                }
            };
            Value::Scalar(sanitize(builtins::goal_dist(goal, vec3(&args[0]))))
        }
        Builtin::RotDist => Value::Scalar(sanitize(builtins::rot_dist(quat(&args[0]), quat(&args[1])))),
        Builtin::Norm => Value::Scalar(sanitize(builtins::norm(vec3(&args[0])))),
        Builtin::Bfs => {
            let grid = grid_arg(&args[0]);
            match (pos(&args[1]), pos(&args[2])) {
                (Some(a), Some(b)) => Value::Path(builtins::bfs(&grid, a, b)),
                _ => Value::Path(Vec::new()),
            }
        }
        Builtin::PathLen => match &args[0] {
            Value::Path(p) => Value::Scalar(sanitize(builtins::path_len(p))),
            other => unreachable!("expected Path, got {:?}", other.sem_type()),
        },
        Builtin::GetPosition => {
            let grid = grid_arg(&args[0]);
            let found = opt_code(1).and_then(|kind| builtins::get_position(&grid, kind, opt_code(2)));
            Value::Pos(found)
        }
        Builtin::GetPositionOnPath => {
            let grid = grid_arg(&args[0]);
            let found = match (pos(&args[1]), pos(&args[2]), opt_code(3)) {
                (Some(a), Some(b), Some(kind)) => {
                    builtins::get_position_on_path(&grid, a, b, kind, opt_code(4), opt_code(5))
                }
                _ => None,
            };
            Value::Pos(found)
        }
    })
}
