use super::{BinOp, Expr, ExprError, Func, Var};

/// Which variables an expression may mention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarScope {
    pub allow_u: bool,
    /// Highest admissible coordinate index; `None` admits any `xK`.
    pub max_x: Option<usize>,
}

impl VarScope {
    pub const ANY: VarScope = VarScope {
        allow_u: true,
        max_x: None,
    };

    /// Coordinates `x1 … x_{N-1}` only.
    pub fn coordinates(n: usize) -> Self {
        VarScope {
            allow_u: false,
            max_x: Some(n.saturating_sub(1)),
        }
    }

    /// `u` only.
    pub fn unknown() -> Self {
        VarScope {
            allow_u: true,
            max_x: Some(0),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr, ExprError> {
    parse_with(text, VarScope::ANY)
}

pub fn parse_with(text: &str, scope: VarScope) -> Result<Expr, ExprError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        scope,
    };
    let e = p.expr()?;
    match p.peek() {
        (Tok::End, _) => Ok(e),
        (t, off) => Err(syntax(off, format!("unexpected {t:?} after expression"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn syntax(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{lit}`")))?;
                if !v.is_finite() {
                    return Err(syntax(start, format!("number `{lit}` overflows")));
                }
                out.push((Tok::Num(v), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Tok::Op(c as char), start));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, start));
                i += 1;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap();
                return Err(syntax(start, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    scope: VarScope,
}

impl Parser {
    fn peek(&self) -> (Tok, usize) {
        self.tokens[self.pos].clone()
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.tokens[self.pos].clone();
        if t.0 != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        let (t, off) = self.bump();
        if t == want {
            Ok(())
        } else {
            Err(syntax(off, format!("expected {want:?}, found {t:?}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().0 {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().0 {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek().0 {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.peek().0 == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let (tok, off) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().0 == Tok::LParen {
                    let func = Func::lookup(&name).ok_or_else(|| ExprError::UnknownIdentifier {
                        offset: off,
                        name: name.clone(),
                    })?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while self.peek().0 == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    if args.len() != func.arity() {
                        return Err(syntax(
                            off,
                            format!(
                                "{} takes {} argument(s), got {}",
                                func.name(),
                                func.arity(),
                                args.len()
                            ),
                        ));
                    }
                    Ok(Expr::Call(func, args))
                } else {
                    self.variable(&name, off).map(Expr::Var)
                }
            }
            t => Err(syntax(off, format!("expected a value, found {t:?}"))),
        }
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Var, ExprError> {
        let unknown = || ExprError::UnknownIdentifier {
            offset,
            name: name.to_string(),
        };
        if name == "u" {
            return if self.scope.allow_u { Ok(Var::U) } else { Err(unknown()) };
        }
        let k: usize = name
            .strip_prefix('x')
            .filter(|d| !d.is_empty() && !d.starts_with('0') && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse().ok())
            .ok_or_else(unknown)?;
        match self.scope.max_x {
            Some(max) if k > max => Err(unknown()),
            _ => Ok(Var::X(k)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CATALOG: [&str; 50] = [
        "exp(u)",
        "2+3*4",
        "x1*(1-x1)",
        "-u",
        "min(u,1)",
        "max(u,-1)",
        "-u^2",
        "(-u)^2",
        "2^-1",
        "2^3^2",
        "(2^3)^2",
        "8/4/2",
        "8/(4/2)",
        "8-4-2",
        "8-(4-2)",
        "1-(2+3)",
        "--u",
        "-(-u)",
        "u*-1",
        "abs(min(u,1))",
        "sqrt(x1^2+x2^2)",
        "log(1+u^2)",
        "sin(u)*cos(u)",
        "exp(-u)/(1+u)",
        "1e-3*u",
        "2.5e2",
        "0.1+0.2",
        "u^(1/3)",
        "(u+1)*(u-1)",
        "u-(-1)",
        "x1+x2*x3",
        "(x1+x2)*x3",
        "-x1-x2",
        "-(x1-x2)",
        "max(min(u,2),-2)",
        "exp(exp(u))",
        "u/-2",
        "u^-2",
        "(u^2)^3",
        "-2^2",
        "(-2)^2",
        "3*(u+1)^2",
        "1/(1+exp(-u))",
        "cos(x1)*sin(x2)",
        "abs(u)^0.5",
        "u*(1-u)*(2-u)",
        "-1",
        "+u",
        "((u))",
        "0.25*x1*(1-x1)",
    ];

    #[test]
    fn print_parse_is_idempotent() {
        for text in CATALOG {
            let e = parse(text).unwrap();
            let printed = e.to_string();
            let again = parse(&printed).unwrap();
            assert_eq!(again, e, "{text} -> {printed}");
            assert_eq!(again.to_string(), printed);
        }
    }

    #[test]
    fn tree_shapes() {
        use Expr::*;
        assert_eq!(
            parse("exp(u)").unwrap(),
            Call(Func::Exp, vec![Var(super::Var::U)])
        );
        assert_eq!(parse("-u^2").unwrap().to_string(), "-u^2");
        assert_eq!(parse("(-u)^2").unwrap().to_string(), "(-u)^2");
        assert_eq!(parse("2+3*4").unwrap().to_string(), "2+3*4");
        assert_eq!(parse("(2+3)*4").unwrap().to_string(), "(2+3)*4");
    }

    #[test]
    fn errors_carry_offsets() {
        match parse("u + foo") {
            Err(ExprError::UnknownIdentifier { offset, name }) => {
                assert_eq!((offset, name.as_str()), (4, "foo"));
            }
            other => panic!("{other:?}"),
        }
        match parse("bar(u)") {
            Err(ExprError::UnknownIdentifier { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("2 +"), Err(ExprError::Syntax { offset: 3, .. })));
        assert!(matches!(parse("(u"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("u $ 2"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("min(u)"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("u u"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("1e999"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x0"), Err(ExprError::UnknownIdentifier { .. })));
    }

    #[test]
    fn scopes_restrict_variables() {
        assert!(parse_with("x1+x2", VarScope::coordinates(3)).is_ok());
        assert!(matches!(
            parse_with("x3", VarScope::coordinates(3)),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(parse_with("u", VarScope::coordinates(3)).is_err());
        assert!(parse_with("x1", VarScope::unknown()).is_err());
        assert!(parse_with("exp(u)", VarScope::unknown()).is_ok());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(Expr::Num),
            Just(Expr::Var(super::Var::U)),
            (1usize..4).prop_map(|k| Expr::Var(super::Var::X(k))),
        ];
        leaf.prop_recursive(5, 40, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))),
                inner.clone().prop_map(|e| Expr::Call(Func::Exp, vec![e])),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn printed_trees_reparse_identically(e in arb_expr()) {
            let printed = e.to_string();
            prop_assert_eq!(parse(&printed).unwrap(), e);
        }
    }
}
