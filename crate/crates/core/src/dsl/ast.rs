use std::fmt;

use super::schema::SemType;

pub const MAX_SUBTASKS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            // printed in call syntax, never needs parentheses
            BinOp::Min | BinOp::Max => 3,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Min => "min",
            BinOp::Max => "max",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Min => a.min(b),
            BinOp::Max => a.max(b),
        }
    }
}

/// Functions from the feature-engineering libraries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Dist,
    GoalDist,
    RotDist,
    Norm,
    Bfs,
    PathLen,
    GetPosition,
    GetPositionOnPath,
}

impl Builtin {
    pub const ALL: [Builtin; 8] = [
        Builtin::Dist,
        Builtin::GoalDist,
        Builtin::RotDist,
        Builtin::Norm,
        Builtin::Bfs,
        Builtin::PathLen,
        Builtin::GetPosition,
        Builtin::GetPositionOnPath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Dist => "dist",
            Builtin::GoalDist => "goal_dist",
            Builtin::RotDist => "rot_dist",
            Builtin::Norm => "norm",
            Builtin::Bfs => "bfs",
            Builtin::PathLen => "path_len",
            Builtin::GetPosition => "get_position",
            Builtin::GetPositionOnPath => "get_position_on_path",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    /// Required parameters followed by optional trailing parameters.
    pub fn params(self) -> (&'static [SemType], &'static [SemType]) {
        use SemType::*;
        match self {
            Builtin::Dist => (&[Vec3, Vec3], &[]),
            Builtin::GoalDist => (&[Vec3], &[]),
            Builtin::RotDist => (&[Quat, Quat], &[]),
            Builtin::Norm => (&[Vec3], &[]),
            Builtin::Bfs => (&[Grid, GridPos, GridPos], &[]),
            Builtin::PathLen => (&[Path], &[]),
            Builtin::GetPosition => (&[Grid, Scalar], &[Scalar]),
            Builtin::GetPositionOnPath => (&[Grid, GridPos, GridPos, Scalar], &[Scalar, Scalar]),
        }
    }

    pub fn returns(self) -> SemType {
        match self {
            Builtin::Dist | Builtin::GoalDist | Builtin::RotDist | Builtin::Norm | Builtin::PathLen => {
                SemType::Scalar
            }
            Builtin::Bfs => SemType::Path,
            Builtin::GetPosition | Builtin::GetPositionOnPath => SemType::GridPos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Feature(String),
    Const(f64),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { func: Builtin, args: Vec<Expr> },
    Mean(Vec<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn call(func: Builtin, args: Vec<Expr>) -> Expr {
        Expr::Call { func, args }
    }

    pub fn feature(name: &str) -> Expr {
        Expr::Feature(name.to_string())
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            _ => u8::MAX,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, name: &str, args: &[&Expr]) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, arg) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{arg}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Feature(name) => f.write_str(name),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Binary { op: op @ (BinOp::Min | BinOp::Max), lhs, rhs } => {
                write_args(f, op.symbol(), &[lhs, rhs])
            }
            Expr::Binary { op, lhs, rhs } => {
                let prec = op.precedence();
                // left-associative: equal precedence on the right needs parentheses
                lhs.write_child(f, lhs.precedence() < prec)?;
                write!(f, " {} ", op.symbol())?;
                rhs.write_child(f, rhs.precedence() <= prec)
            }
            Expr::Call { func, args } => write_args(f, func.name(), &args.iter().collect::<Vec<_>>()),
            Expr::Mean(args) => write_args(f, "mean", &args.iter().collect::<Vec<_>>()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subtask {
    pub expr: Expr,
    pub increasing: bool,
}

/// A type-checked progress function.
///
/// Equality is structural: two programs are equal when their subtasks are,
/// regardless of the text they were parsed from.
#[derive(Debug, Clone)]
pub struct ProgressProgram {
    pub(crate) subtasks: Vec<Subtask>,
    pub(crate) source_text: String,
}

impl PartialEq for ProgressProgram {
    fn eq(&self, other: &Self) -> bool {
        self.subtasks == other.subtasks
    }
}

impl ProgressProgram {
    pub fn subtasks(&self) -> &[Subtask] {
        &self.subtasks
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    pub fn directions(&self) -> Vec<bool> {
        self.subtasks.iter().map(|s| s.increasing).collect()
    }

    /// Canonical source text; parsing it yields an equal program.
    pub fn print(&self) -> String {
        self.subtasks
            .iter()
            .map(|s| {
                let dir = if s.increasing { "increasing" } else { "decreasing" };
                format!("subtask {dir}: {}\n", s.expr)
            })
            .collect()
    }
}
