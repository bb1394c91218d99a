//! Canonical rendering and parsing for expression trees.
//!
//! The canonical form is fully parenthesized with explicit `*`, `^` for
//! powers and function syntax for unary operators, so it is unambiguous at
//! the character level:
//!
//! ```text
//! expr := '(' expr binop expr ')' | '(' expr ')' | expr '^' int
//!       | func '(' expr ')' | var | int
//! binop ::= '+' | '-' | '*' | '/'      func ::= log | cos | sin | neg
//! var   ::= letter digit*              int  ::= '-'? digit+
//! ```
//!
//! [`render_pretty`] is a paper-style display form (implicit multiplication,
//! minimal parentheses); it is never used for dataset emission.

use super::{bin, pow, unary, AbstractRule, BinOp, Expr, ExprError, UnaryOp};

/// Fully parenthesized canonical rendering; `parse(render(e))` is
/// structurally equal to `e`.
pub fn render(e: &Expr) -> String {
    let mut out = String::new();
    render_into(e, &mut out);
    out
}

fn render_into(e: &Expr, out: &mut String) {
    match e {
        Expr::Bin { op, lhs, rhs } => {
            out.push('(');
            render_into(lhs, out);
            out.push(op.symbol());
            render_into(rhs, out);
            out.push(')');
        }
        Expr::Pow { base, exp } => {
            out.push('(');
            render_into(base, out);
            out.push('^');
            out.push_str(&exp.to_string());
            out.push(')');
        }
        Expr::Unary { op, arg } => {
            out.push_str(op.name());
            out.push('(');
            render_into(arg, out);
            out.push(')');
        }
        Expr::Var(name) | Expr::RuleVar(name) => out.push_str(name),
        Expr::Const(v) => out.push_str(&v.to_string()),
    }
}

/// Display-only rendering with implicit multiplication and minimal
/// parentheses, e.g. `(2x+5)^2-(3y-6)^2`.
pub fn render_pretty(e: &Expr) -> String {
    fn prec(e: &Expr) -> u8 {
        match e {
            Expr::Bin { op: BinOp::Add | BinOp::Sub, .. } => 1,
            Expr::Bin { op: BinOp::Mul | BinOp::Div, .. } => 2,
            Expr::Pow { .. } => 3,
            _ => 4,
        }
    }
    fn go(e: &Expr, parent_prec: u8, out: &mut String) {
        let mine = prec(e);
        let need_parens = mine < parent_prec;
        if need_parens {
            out.push('(');
        }
        match e {
            Expr::Bin { op, lhs, rhs } => {
                let (lp, rp) = match op {
                    // Right operand of - and / binds tighter.
                    BinOp::Sub | BinOp::Div => (mine, mine + 1),
                    _ => (mine, mine),
                };
                // Implicit multiplication for coefficient-style products.
                if *op == BinOp::Mul
                    && matches!(**lhs, Expr::Const(v) if v >= 0)
                    && matches!(**rhs, Expr::Var(_) | Expr::RuleVar(_))
                {
                    go(lhs, mine, out);
                    go(rhs, mine + 1, out);
                } else {
                    go(lhs, lp, out);
                    out.push(op.symbol());
                    go(rhs, rp, out);
                }
            }
            Expr::Pow { base, exp } => {
                go(base, mine + 1, out);
                out.push('^');
                out.push_str(&exp.to_string());
            }
            Expr::Unary { op, arg } => {
                out.push_str(op.name());
                out.push('(');
                go(arg, 0, out);
                out.push(')');
            }
            Expr::Var(name) | Expr::RuleVar(name) => out.push_str(name),
            Expr::Const(v) => out.push_str(&v.to_string()),
        }
        if need_parens {
            out.push(')');
        }
    }
    let mut out = String::new();
    go(e, 0, &mut out);
    out
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Parser<'a> {
        Parser { text, bytes: text.as_bytes(), pos: 0 }
    }

    fn error(&self, msg: impl Into<String>) -> ExprError {
        ExprError::Parse { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, expected: u8) -> Result<(), ExprError> {
        match self.peek() {
            Some(c) if c == expected => {
                self.pos += 1;
                Ok(())
            }
            found => Err(self.error(format!(
                "expected '{}' but found {}",
                expected as char,
                found.map_or("end of input".to_string(), |c| format!("'{}'", c as char))
            ))),
        }
    }

    fn parse_int(&mut self) -> Result<i64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        if self.bytes.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(self.error("expected an integer"));
        }
        self.text[start..self.pos]
            .parse::<i64>()
            .map_err(|_| self.error("integer out of range"))
    }

    fn parse_ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        self.text[start..self.pos].to_string()
    }

    fn parse_expr(&mut self) -> Result<Expr, ExprError> {
        let mut e = self.parse_primary()?;
        while self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.parse_int()?;
            e = pow(e, exp);
        }
        Ok(e)
    }

    fn parse_primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let first = self.parse_expr()?;
                match self.peek() {
                    Some(b')') => {
                        self.pos += 1;
                        Ok(first)
                    }
                    Some(op @ (b'+' | b'-' | b'*' | b'/')) => {
                        self.pos += 1;
                        let op = match op {
                            b'+' => BinOp::Add,
                            b'-' => BinOp::Sub,
                            b'*' => BinOp::Mul,
                            _ => BinOp::Div,
                        };
                        let second = self.parse_expr()?;
                        self.eat(b')')?;
                        Ok(bin(op, first, second))
                    }
                    _ => Err(self.error("expected an operator or ')'")),
                }
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let name = self.parse_ident();
                let func = match name.as_str() {
                    "log" => Some(UnaryOp::Log),
                    "cos" => Some(UnaryOp::Cos),
                    "sin" => Some(UnaryOp::Sin),
                    "neg" => Some(UnaryOp::Neg),
                    _ => None,
                };
                if let Some(op) = func {
                    self.eat(b'(')?;
                    let arg = self.parse_expr()?;
                    self.eat(b')')?;
                    return Ok(unary(op, arg));
                }
                if is_valid_var_name(&name) {
                    Ok(Expr::Var(name))
                } else {
                    Err(self.error(format!("'{name}' is not a function or variable name")))
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'-' => Ok(Expr::Const(self.parse_int()?)),
            Some(c) => Err(self.error(format!("unexpected character '{}'", c as char))),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

/// Variable names are one letter followed by optional digits.
pub fn is_valid_var_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_digit())
}

/// Parses canonical (or whitespace-padded) expression text.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut parser = Parser::new(text);
    let e = parser.parse_expr()?;
    parser.skip_ws();
    if parser.pos != parser.bytes.len() {
        return Err(parser.error("trailing input after expression"));
    }
    Ok(e)
}

/// Promotes `Var` leaves whose name is in `names` to rule variables.
pub fn promote_rule_vars(e: &Expr, names: &[&str]) -> Expr {
    match e {
        Expr::Var(name) if names.contains(&name.as_str()) => Expr::RuleVar(name.clone()),
        Expr::Bin { op, lhs, rhs } => {
            bin(*op, promote_rule_vars(lhs, names), promote_rule_vars(rhs, names))
        }
        Expr::Pow { base, exp } => pow(promote_rule_vars(base, names), *exp),
        Expr::Unary { op, arg } => unary(*op, promote_rule_vars(arg, names)),
        leaf => leaf.clone(),
    }
}

/// Parses an equation `LHS=RHS` into an [`AbstractRule`], treating the
/// reserved names of [`super::RULE_VAR_NAMES`] as rule variables.
pub fn parse_rule(id: &str, text: &str) -> Result<AbstractRule, ExprError> {
    let at = text.find('=').ok_or(ExprError::Parse {
        pos: 0,
        msg: "rule must have the form LHS=RHS".into(),
    })?;
    let lhs = promote_rule_vars(&parse(&text[..at])?, &super::RULE_VAR_NAMES);
    let rhs = promote_rule_vars(&parse(&text[at + 1..])?, &super::RULE_VAR_NAMES);
    AbstractRule::new(id, lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::super::{rule_var, var};
    use super::*;

    #[test]
    fn render_matches_the_documented_form() {
        let e = bin(
            BinOp::Sub,
            pow(var("a"), 2),
            pow(var("b"), 2),
        );
        assert_eq!(render(&e), "((a^2)-(b^2))");
    }

    #[test]
    fn parse_rebuilds_the_same_tree() {
        let e = bin(BinOp::Sub, pow(var("a"), 2), pow(var("b"), 2));
        assert_eq!(parse("((a^2)-(b^2))").unwrap(), e);
        // Redundant grouping and whitespace are tolerated.
        assert_eq!(parse(" ( (a^2) - (b^2) ) ").unwrap(), e);
    }

    #[test]
    fn parse_handles_functions_vars_and_ints() {
        assert_eq!(
            parse("log((5*t1))").unwrap(),
            unary(UnaryOp::Log, bin(BinOp::Mul, Expr::Const(5), var("t1")))
        );
        assert_eq!(parse("-12").unwrap(), Expr::Const(-12));
        assert_eq!(parse("(x^-2)").unwrap(), pow(var("x"), -2));
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse("((a^2)-(b^2)") {
            Err(ExprError::Parse { pos, .. }) => assert_eq!(pos, 12),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse("foo(x)").is_err());
        assert!(parse("(a%b)").is_err());
        assert!(parse("x y").is_err());
    }

    #[test]
    fn parse_rule_promotes_rule_variables() {
        let rule = parse_rule("dos", "((a^2)-(b^2))=((a+b)*(a-b))").unwrap();
        assert_eq!(rule.lhs, bin(BinOp::Sub, pow(rule_var("a"), 2), pow(rule_var("b"), 2)));
        assert_eq!(rule.render(), "((a^2)-(b^2))=((a+b)*(a-b))");
    }

    #[test]
    fn pretty_rendering_reads_like_the_paper() {
        let two_x_plus_5 = bin(
            BinOp::Add,
            bin(BinOp::Mul, Expr::Const(2), var("x")),
            Expr::Const(5),
        );
        assert_eq!(render_pretty(&two_x_plus_5), "2x+5");
        let squared = pow(two_x_plus_5, 2);
        assert_eq!(render_pretty(&squared), "(2x+5)^2");
        let diff = bin(BinOp::Sub, squared.clone(), squared);
        assert_eq!(render_pretty(&diff), "(2x+5)^2-(2x+5)^2");
    }
}
