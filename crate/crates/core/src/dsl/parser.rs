//! Recursive-descent parser that type-checks while it builds the tree.

use super::ast::{BinOp, Builtin, Expr, ProgressProgram, Subtask, MAX_SUBTASKS};
use super::lexer::{tokenize, Tok, Token};
use super::schema::{FeatureSchema, SemType};
use super::{DslError, Loc};

/// Parse and type-check `source` against `schema`.
pub fn parse(source: &str, schema: &FeatureSchema) -> Result<ProgressProgram, DslError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0, schema };
    let subtasks = parser.program()?;
    Ok(ProgressProgram { subtasks, source_text: source.to_string() })
}

impl ProgressProgram {
    /// Build a program from already-constructed subtasks, checking it
    /// against `schema` through its printed form.
    pub fn from_subtasks(subtasks: Vec<Subtask>, schema: &FeatureSchema) -> Result<Self, DslError> {
        let text = ProgressProgram { subtasks, source_text: String::new() }.print();
        parse(&text, schema)
    }
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    schema: &'a FeatureSchema,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn loc(&self) -> Loc {
        self.tokens[self.pos].loc
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, DslError> {
        Err(DslError::Syntax { loc: self.loc(), message: message.into() })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, DslError> {
        if *self.peek() == want {
            Ok(self.advance())
        } else {
            self.syntax(format!("expected {what}, found {}", self.peek().describe()))
        }
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.advance();
        }
    }

    fn program(&mut self) -> Result<Vec<Subtask>, DslError> {
        let mut subtasks = Vec::new();
        self.skip_newlines();
        while *self.peek() != Tok::Eof {
            let loc = self.loc();
            subtasks.push(self.subtask()?);
            if subtasks.len() > MAX_SUBTASKS {
                return Err(DslError::SubtaskCount { loc, found: subtasks.len() });
            }
            self.skip_newlines();
        }
        if subtasks.is_empty() {
            return Err(DslError::SubtaskCount { loc: self.loc(), found: 0 });
        }
        Ok(subtasks)
    }

    fn subtask(&mut self) -> Result<Subtask, DslError> {
        match self.peek() {
            Tok::Ident(kw) if kw == "subtask" => {
                self.advance();
            }
            other => return self.syntax(format!("expected `subtask`, found {}", other.describe())),
        }
        let increasing = match self.peek() {
            Tok::Ident(d) if d == "increasing" => true,
            Tok::Ident(d) if d == "decreasing" => false,
            other => {
                return self.syntax(format!(
                    "expected `increasing` or `decreasing`, found {}",
                    other.describe()
                ))
            }
        };
        self.advance();
        self.expect(Tok::Colon, "`:`")?;
        let loc = self.loc();
        let (expr, ty) = self.expr()?;
        if ty != SemType::Scalar {
            return Err(DslError::Type {
                loc,
                context: "subtask expression".into(),
                expected: SemType::Scalar,
                found: ty,
            });
        }
        match self.peek() {
            Tok::Newline | Tok::Eof => {}
            other => return self.syntax(format!("expected end of line, found {}", other.describe())),
        }
        Ok(Subtask { expr, increasing })
    }

    fn expr(&mut self) -> Result<(Expr, SemType), DslError> {
        let loc = self.loc();
        let (mut lhs, mut ty) = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok((lhs, ty)),
            };
            self.advance();
            let rloc = self.loc();
            let (rhs, rty) = self.term()?;
            check_scalar(ty, loc, op)?;
            check_scalar(rty, rloc, op)?;
            lhs = Expr::binary(op, lhs, rhs);
            ty = SemType::Scalar;
        }
    }

    fn term(&mut self) -> Result<(Expr, SemType), DslError> {
        let loc = self.loc();
        let (mut lhs, mut ty) = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok((lhs, ty)),
            };
            self.advance();
            let rloc = self.loc();
            let (rhs, rty) = self.factor()?;
            check_scalar(ty, loc, op)?;
            check_scalar(rty, rloc, op)?;
            lhs = Expr::binary(op, lhs, rhs);
            ty = SemType::Scalar;
        }
    }

    fn factor(&mut self) -> Result<(Expr, SemType), DslError> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Number(v) => {
                self.advance();
                Ok((Expr::Const(v), SemType::Scalar))
            }
            Tok::Minus => {
                // negative literal; there is no general unary minus
                self.advance();
                match self.peek().clone() {
                    Tok::Number(v) => {
                        self.advance();
                        Ok((Expr::Const(-v), SemType::Scalar))
                    }
                    other => self.syntax(format!("expected a number after `-`, found {}", other.describe())),
                }
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    self.advance();
                    let args = self.args()?;
                    self.expect(Tok::RParen, "`)`")?;
                    self.call(&name, args, loc)
                } else {
                    match self.schema.get(&name) {
                        Some(ty) => Ok((Expr::Feature(name), ty)),
                        None => Err(DslError::UnknownFeature { loc, name }),
                    }
                }
            }
            other => self.syntax(format!("expected an expression, found {}", other.describe())),
        }
    }

    fn args(&mut self) -> Result<Vec<(Expr, SemType, Loc)>, DslError> {
        let mut args = Vec::new();
        if *self.peek() == Tok::RParen {
            return Ok(args);
        }
        loop {
            let loc = self.loc();
            let (e, t) = self.expr()?;
            args.push((e, t, loc));
            if *self.peek() == Tok::Comma {
                self.advance();
            } else {
                return Ok(args);
            }
        }
    }

    fn call(&self, name: &str, args: Vec<(Expr, SemType, Loc)>, loc: Loc) -> Result<(Expr, SemType), DslError> {
        match name {
            "min" | "max" => {
                if args.len() != 2 {
                    return Err(DslError::Arity { loc, function: name.into(), expected: "2".into(), found: args.len() });
                }
                let op = if name == "min" { BinOp::Min } else { BinOp::Max };
                let mut it = args.into_iter();
                let (a, at, al) = it.next().unwrap();
                let (b, bt, bl) = it.next().unwrap();
                check_scalar(at, al, op)?;
                check_scalar(bt, bl, op)?;
                Ok((Expr::binary(op, a, b), SemType::Scalar))
            }
            "mean" => {
                if args.is_empty() {
                    return Err(DslError::Arity { loc, function: name.into(), expected: "at least 1".into(), found: 0 });
                }
                let mut exprs = Vec::with_capacity(args.len());
                for (e, t, l) in args {
                    expect_type(t, SemType::Scalar, l, "argument of `mean`")?;
                    exprs.push(e);
                }
                Ok((Expr::Mean(exprs), SemType::Scalar))
            }
            _ => {
                let func = Builtin::from_name(name)
                    .ok_or_else(|| DslError::UnknownFunction { loc, name: name.to_string() })?;
                let (required, optional) = func.params();
                let max = required.len() + optional.len();
                if args.len() < required.len() || args.len() > max {
                    let expected = if optional.is_empty() {
                        required.len().to_string()
                    } else {
                        format!("{} to {}", required.len(), max)
                    };
                    return Err(DslError::Arity { loc, function: name.into(), expected, found: args.len() });
                }
                if func == Builtin::GoalDist && self.schema.get("goal_pos") != Some(SemType::Vec3) {
                    return Err(DslError::UnknownFeature { loc, name: "goal_pos".into() });
                }
                let mut exprs = Vec::with_capacity(args.len());
                for (i, (e, t, l)) in args.into_iter().enumerate() {
                    let want = required.iter().chain(optional).nth(i).copied().unwrap();
                    expect_type(t, want, l, &format!("argument {} of `{name}`", i + 1))?;
                    exprs.push(e);
                }
                Ok((Expr::call(func, exprs), func.returns()))
            }
        }
    }
}

fn expect_type(found: SemType, expected: SemType, loc: Loc, context: &str) -> Result<(), DslError> {
    if found == expected {
        Ok(())
    } else {
        Err(DslError::Type { loc, context: context.to_string(), expected, found })
    }
}

fn check_scalar(found: SemType, loc: Loc, op: BinOp) -> Result<(), DslError> {
    expect_type(found, SemType::Scalar, loc, &format!("operand of {op:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hands_schema() -> FeatureSchema {
        FeatureSchema::new([
            ("object_pos", SemType::Vec3),
            ("goal_pos", SemType::Vec3),
            ("object_rot", SemType::Quat),
            ("goal_rot", SemType::Quat),
            ("left_hand_pos", SemType::Vec3),
            ("right_hand_pos", SemType::Vec3),
            ("cup_left_handle_pos", SemType::Vec3),
            ("cup_right_handle_pos", SemType::Vec3),
            ("a", SemType::Vec3),
            ("s", SemType::Scalar),
        ])
        .unwrap()
    }

    #[test]
    fn single_decreasing_subtask() {
        let p = parse("subtask decreasing: goal_dist(object_pos)", &hands_schema()).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.directions(), vec![false]);
        assert_eq!(
            p.subtasks()[0].expr,
            Expr::call(Builtin::GoalDist, vec![Expr::feature("object_pos")])
        );
    }

    #[test]
    fn two_subtask_grip_then_rotate() {
        let src = "subtask decreasing: mean(dist(left_hand_pos, cup_left_handle_pos), dist(right_hand_pos, cup_right_handle_pos))\nsubtask decreasing: rot_dist(object_rot, goal_rot)";
        let p = parse(src, &hands_schema()).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.directions(), vec![false, false]);
        assert!(matches!(&p.subtasks()[0].expr, Expr::Mean(args) if args.len() == 2));
    }

    #[test]
    fn dist_with_one_argument_is_arity_error() {
        let err = parse("subtask increasing: dist(a)", &hands_schema()).unwrap_err();
        match err {
            DslError::Arity { function, found, loc, .. } => {
                assert_eq!(function, "dist");
                assert_eq!(found, 1);
                assert_eq!(loc, Loc { line: 1, col: 21 });
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_feature_carries_location() {
        let err = parse("subtask increasing: s\nsubtask decreasing: nope + 1", &hands_schema()).unwrap_err();
        assert_eq!(err, DslError::UnknownFeature { loc: Loc { line: 2, col: 21 }, name: "nope".into() });
    }

    #[test]
    fn vector_valued_subtask_is_type_error() {
        let err = parse("subtask decreasing: object_pos", &hands_schema()).unwrap_err();
        assert!(matches!(err, DslError::Type { expected: SemType::Scalar, found: SemType::Vec3, .. }));
    }

    #[test]
    fn arithmetic_on_vectors_is_type_error() {
        let err = parse("subtask decreasing: object_pos + 1", &hands_schema()).unwrap_err();
        assert!(matches!(err, DslError::Type { found: SemType::Vec3, .. }));
    }

    #[test]
    fn missing_direction_is_syntax_error() {
        let err = parse("subtask: s", &hands_schema()).unwrap_err();
        assert!(matches!(err, DslError::Syntax { loc: Loc { line: 1, col: 8 }, .. }));
    }

    #[test]
    fn empty_and_oversized_programs_rejected() {
        assert!(matches!(parse("# nothing\n", &hands_schema()), Err(DslError::SubtaskCount { found: 0, .. })));
        let nine = "subtask increasing: s\n".repeat(9);
        assert!(matches!(parse(&nine, &hands_schema()), Err(DslError::SubtaskCount { found: 9, .. })));
        let eight = "subtask increasing: s\n".repeat(8);
        assert_eq!(parse(&eight, &hands_schema()).unwrap().len(), 8);
    }

    #[test]
    fn goal_dist_requires_goal_pos() {
        let schema = FeatureSchema::new([("x", SemType::Vec3)]).unwrap();
        let err = parse("subtask decreasing: goal_dist(x)", &schema).unwrap_err();
        assert!(matches!(err, DslError::UnknownFeature { name, .. } if name == "goal_pos"));
    }

    #[test]
    fn precedence_and_negative_literals() {
        let p = parse("subtask increasing: s - -2 * s + min(s, 3)", &hands_schema()).unwrap();
        let expected = Expr::binary(
            BinOp::Add,
            Expr::binary(
                BinOp::Sub,
                Expr::feature("s"),
                Expr::binary(BinOp::Mul, Expr::Const(-2.0), Expr::feature("s")),
            ),
            Expr::binary(BinOp::Min, Expr::feature("s"), Expr::Const(3.0)),
        );
        assert_eq!(p.subtasks()[0].expr, expected);
    }

    #[test]
    fn printing_preserves_associativity() {
        let schema = hands_schema();
        let e = Expr::binary(
            BinOp::Sub,
            Expr::feature("s"),
            Expr::binary(BinOp::Sub, Expr::feature("s"), Expr::Const(1.0)),
        );
        let p = ProgressProgram::from_subtasks(vec![Subtask { expr: e.clone(), increasing: true }], &schema).unwrap();
        assert_eq!(p.print(), "subtask increasing: s - (s - 1)\n");
        assert_eq!(p.subtasks()[0].expr, e);
    }

    #[test]
    fn trailing_garbage_rejected() {
        let err = parse("subtask increasing: s s", &hands_schema()).unwrap_err();
        assert!(matches!(err, DslError::Syntax { loc: Loc { line: 1, col: 23 }, .. }));
    }
}
