//! Arithmetic expressions in t, x1, x2 for scenario fields.

use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("expression `{src}`: {msg} at offset {pos}")]
pub struct ParseError {
    pub src: String,
    pub msg: String,
    pub pos: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "log" | "ln" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "tanh" => (Func::Tanh, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression; evaluate with `eval(t, x1, x2)`.
#[derive(Clone, PartialEq)]
pub struct Expr {
    src: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.src)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let mut p = Parser { src, bytes: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr { src: src.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn eval(&self, t: f64, x1: f64, x2: f64) -> f64 {
        eval(&self.root, &[t, x1, x2])
    }

    /// True when the expression does not mention t.
    pub fn is_steady(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Var(i) => *i != 0,
                Node::Neg(a) => walk(a),
                Node::Bin(_, a, b) => walk(a) && walk(b),
                Node::Call(_, args) => args.iter().all(walk),
            }
        }
        walk(&self.root)
    }
}

fn eval(n: &Node, v: &[f64; 3]) -> f64 {
    match n {
        Node::Num(x) => *x,
        Node::Var(i) => v[*i],
        Node::Neg(a) => -eval(a, v),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, v), eval(b, v));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], v);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Tanh => a.tanh(),
                Func::Min => a.min(eval(&args[1], v)),
                Func::Max => a.max(eval(&args[1], v)),
                Func::Pow => a.powf(eval(&args[1], v)),
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ParseError {
        ParseError { src: self.src.to_string(), msg: msg.to_string(), pos: self.pos }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => '+',
                Some(b'-') => '-',
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') if self.bytes.get(self.pos + 1) == Some(&b'*') => return Ok(lhs),
                Some(b'*') => '*',
                Some(b'/') => '/',
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        let is_pow = if self.eat(b'^') {
            true
        } else if self.peek() == Some(b'*') && self.bytes.get(self.pos + 1) == Some(&b'*') {
            self.pos += 2;
            true
        } else {
            false
        };
        if is_pow {
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_digit() || b[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
            let mut k = self.pos + 1;
            if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                k += 1;
            }
            if k < b.len() && b[k].is_ascii_digit() {
                self.pos = k;
                while self.pos < b.len() && b[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        self.src[start..self.pos].parse().map(Node::Num).map_err(|_| ParseError {
            src: self.src.to_string(),
            msg: "malformed number".into(),
            pos: start,
        })
    }

    fn ident(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_alphanumeric() || b[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if self.peek() == Some(b'(') {
            let Some((f, arity)) = Func::lookup(name) else {
                self.pos = start;
                return Err(self.error(&format!("unknown function `{name}`")));
            };
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            if args.len() != arity {
                self.pos = start;
                return Err(self.error(&format!("`{name}` takes {arity} argument(s), got {}", args.len())));
            }
            return Ok(Node::Call(f, args));
        }
        Ok(match name {
            "t" => Node::Var(0),
            "x1" | "x" => Node::Var(1),
            "x2" | "y" => Node::Var(2),
            "pi" => Node::Num(std::f64::consts::PI),
            "e" => Node::Num(std::f64::consts::E),
            _ => {
                self.pos = start;
                return Err(self.error(&format!("unknown variable `{name}`")));
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str) -> f64 {
        Expr::parse(s).unwrap().eval(0.5, 0.25, 2.0)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(ev("-2^2"), -4.0);
        assert_eq!(ev("2**3"), 8.0);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("1 - 2 - 3"), -4.0);
        assert_eq!(ev("1.5e2 + 2E-1"), 150.2);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("t + x1 + x2"), 2.75);
        assert_eq!(ev("x * y"), 0.5);
        assert!((ev("sin(pi * x1)") - (std::f64::consts::PI * 0.25).sin()).abs() < 1e-15);
        assert_eq!(ev("max(x, min(y, 1))"), 1.0);
        assert_eq!(ev("pow(y, 3)"), 8.0);
        assert!((ev("exp(log(3))") - 3.0).abs() < 1e-15);
        assert!(Expr::parse("x1 * 2").unwrap().is_steady());
        assert!(!Expr::parse("cos(t)").unwrap().is_steady());
    }

    #[test]
    fn errors_carry_position() {
        let e = Expr::parse("1 + foo").unwrap_err();
        assert_eq!(e.pos, 4);
        assert!(Expr::parse("sin(1, 2)").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("bar(1)").is_err());
    }
}
