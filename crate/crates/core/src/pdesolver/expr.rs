//! Tiny expression language for initial-data profiles in `x`.
//!
//! Supports numbers, `x`, `pi`, `e`, `+ - * / ^` (with unary minus, `^`
//! right-associative), parentheses and the functions `sin cos tan tanh exp
//! ln log sqrt abs`. Example: `1 + 0.5*cos(2*pi*x)`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character `{ch}` at position {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("expected `{expected}` at position {pos}")]
    Expected { expected: char, pos: usize },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdent { name: String, pos: usize },
    #[error("trailing input at position {pos}")]
    TrailingInput { pos: usize },
}

#[derive(Debug, Clone)]
enum Node {
    Number(f64),
    Variable,
    Unary(fn(f64) -> f64, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone, Copy)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// A parsed expression, evaluated pointwise over `x`.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
}

impl Expression {
    pub fn parse(text: &str) -> Result<Expression, ExprError> {
        let mut parser = Parser {
            chars: text.char_indices().collect(),
            pos: 0,
        };
        let root = parser.expression()?;
        parser.skip_ws();
        if parser.pos < parser.chars.len() {
            return Err(ExprError::TrailingInput {
                pos: parser.chars[parser.pos].0,
            });
        }
        Ok(Expression { root })
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_node(&self.root, x)
    }
}

fn eval_node(node: &Node, x: f64) -> f64 {
    match node {
        Node::Number(v) => *v,
        Node::Variable => x,
        Node::Unary(f, inner) => f(eval_node(inner, x)),
        Node::Binary(op, a, b) => {
            let (a, b) = (eval_node(a, x), eval_node(b, x));
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
    }
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|(_, c)| *c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn byte_pos(&self) -> usize {
        self.chars
            .get(self.pos)
            .map(|(i, _)| *i)
            .unwrap_or_else(|| self.chars.last().map(|(i, _)| i + 1).unwrap_or(0))
    }

    fn expression(&mut self) -> Result<Node, ExprError> {
        let mut node = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some('+') => {
                    self.bump();
                    node = Node::Binary(BinOp::Add, Box::new(node), Box::new(self.term()?));
                }
                Some('-') => {
                    self.bump();
                    node = Node::Binary(BinOp::Sub, Box::new(node), Box::new(self.term()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut node = self.factor()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some('*') => {
                    self.bump();
                    node = Node::Binary(BinOp::Mul, Box::new(node), Box::new(self.factor()?));
                }
                Some('/') => {
                    self.bump();
                    node = Node::Binary(BinOp::Div, Box::new(node), Box::new(self.factor()?));
                }
                _ => return Ok(node),
            }
        }
    }

    // Unary minus binds looser than `^`, so -x^2 is -(x^2).
    fn factor(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        if self.peek() == Some('-') {
            self.bump();
            let inner = self.factor()?;
            return Ok(Node::Binary(
                BinOp::Sub,
                Box::new(Node::Number(0.0)),
                Box::new(inner),
            ));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        self.skip_ws();
        if self.peek() == Some('^') {
            self.bump();
            let exponent = self.factor()?; // right associative
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        let Some(c) = self.peek() else {
            return Err(ExprError::UnexpectedEnd);
        };
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if c == '(' {
            self.bump();
            let inner = self.expression()?;
            self.skip_ws();
            if self.peek() != Some(')') {
                return Err(ExprError::Expected {
                    expected: ')',
                    pos: self.byte_pos(),
                });
            }
            self.bump();
            return Ok(inner);
        }
        if c.is_ascii_alphabetic() || c == '_' {
            return self.ident();
        }
        Err(ExprError::UnexpectedChar {
            ch: c,
            pos: self.byte_pos(),
        })
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            self.bump();
        }
        // Scientific notation tail.
        if matches!(self.peek(), Some('e') | Some('E')) {
            let mark = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.bump();
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.bump();
                }
            } else {
                self.pos = mark; // the `e` was an identifier, not an exponent
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|(_, c)| c).collect();
        text.parse::<f64>()
            .map(Node::Number)
            .map_err(|_| ExprError::UnexpectedChar {
                ch: text.chars().next().unwrap_or('?'),
                pos: self.chars[start].0,
            })
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let byte = self.byte_pos();
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        let name: String = self.chars[start..self.pos].iter().map(|(_, c)| c).collect();
        match name.as_str() {
            "x" => return Ok(Node::Variable),
            "pi" => return Ok(Node::Number(std::f64::consts::PI)),
            "e" => return Ok(Node::Number(std::f64::consts::E)),
            _ => {}
        }
        let func: fn(f64) -> f64 = match name.as_str() {
            "sin" => f64::sin,
            "cos" => f64::cos,
            "tan" => f64::tan,
            "tanh" => f64::tanh,
            "exp" => f64::exp,
            "ln" | "log" => f64::ln,
            "sqrt" => f64::sqrt,
            "abs" => f64::abs,
            _ => return Err(ExprError::UnknownIdent { name, pos: byte }),
        };
        self.skip_ws();
        if self.peek() != Some('(') {
            return Err(ExprError::Expected {
                expected: '(',
                pos: self.byte_pos(),
            });
        }
        self.bump();
        let arg = self.expression()?;
        self.skip_ws();
        if self.peek() != Some(')') {
            return Err(ExprError::Expected {
                expected: ')',
                pos: self.byte_pos(),
            });
        }
        self.bump();
        Ok(Node::Unary(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn arithmetic_and_precedence() {
        let e = Expression::parse("1 + 2*3 - 4/2").unwrap();
        assert_relative_eq!(e.eval(0.0), 5.0);
        let e = Expression::parse("2^3^2").unwrap();
        assert_relative_eq!(e.eval(0.0), 512.0); // right associative
        let e = Expression::parse("-x^2 + 1").unwrap();
        assert_relative_eq!(e.eval(2.0), -3.0);
    }

    #[test]
    fn functions_and_constants() {
        let e = Expression::parse("1 + 0.5*cos(2*pi*x)").unwrap();
        assert_relative_eq!(e.eval(0.0), 1.5);
        assert_relative_eq!(e.eval(0.25), 1.0, epsilon = 1e-12);
        let e = Expression::parse("exp(ln(3))").unwrap();
        assert_relative_eq!(e.eval(0.0), 3.0, epsilon = 1e-12);
        let e = Expression::parse("1.5e-1 + sqrt(abs(-4))").unwrap();
        assert_relative_eq!(e.eval(0.0), 2.15, epsilon = 1e-12);
    }

    #[test]
    fn errors_are_positioned() {
        assert!(matches!(
            Expression::parse("1 + foo(2)"),
            Err(ExprError::UnknownIdent { .. })
        ));
        assert!(matches!(
            Expression::parse("(1 + 2"),
            Err(ExprError::Expected { expected: ')', .. })
        ));
        assert!(matches!(
            Expression::parse("1 2"),
            Err(ExprError::TrailingInput { .. })
        ));
    }
}
