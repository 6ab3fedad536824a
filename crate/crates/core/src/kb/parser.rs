//! Hand-written lexer and recursive-descent parser for the clause language.

use thiserror::Error;

use super::{Atom, Clause, CmpOp, Comparison, Literal, Program, Term};


/***** ERRORS *****/
#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("probability {value} at {line}:{column} is outside [0, 1]")]
    ProbabilityRange { value: f64, line: usize, column: usize },
    #[error("clause at line {line} is not range-restricted: variable {variable} does not occur in a body atom")]
    RangeRestriction { variable: String, line: usize },
}


/***** LEXER *****/
#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Float(f64),
    ColonColon,
    If,
    LParen,
    RParen,
    Comma,
    Dot,
    Cmp(CmpOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("'{s}'"),
            Tok::Int(i) => format!("'{i}'"),
            Tok::Float(x) => format!("'{x}'"),
            Tok::ColonColon => "'::'".into(),
            Tok::If => "':-'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Dot => "'.'".into(),
            Tok::Cmp(op) => format!("'{}'", op.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError::Syntax { line, column, message };

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        macro_rules! bump {
            ($n:expr) => {{
                for _ in 0..$n {
                    if chars[i] == '\n' {
                        line += 1;
                        col = 1;
                    } else {
                        col += 1;
                    }
                    i += 1;
                }
            }};
        }
        macro_rules! peek {
            ($k:expr) => {
                chars.get(i + $k).copied()
            };
        }

        if c.is_whitespace() {
            bump!(1);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!(1);
            }
            continue;
        }

        let tok = if c.is_ascii_lowercase() || c.is_ascii_uppercase() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!(1);
            }
            let word: String = chars[start..i].iter().collect();
            if c.is_ascii_lowercase() { Tok::Ident(word) } else { Tok::Var(word) }
        } else if c.is_ascii_digit() || (c == '-' && peek!(1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            bump!(1);
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!(1);
            }
            let mut float = false;
            // A dot only continues the number when a digit follows; otherwise it ends the clause.
            if peek!(0) == Some('.') && peek!(1).is_some_and(|d| d.is_ascii_digit()) {
                float = true;
                bump!(1);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!(1);
                }
            }
            if matches!(peek!(0), Some('e' | 'E')) {
                let sign = usize::from(matches!(peek!(1), Some('+' | '-')));
                if peek!(1 + sign).is_some_and(|d| d.is_ascii_digit()) {
                    float = true;
                    bump!(1 + sign);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!(1);
                    }
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            if float {
                Tok::Float(lexeme.parse().map_err(|_| err(tl, tc, format!("malformed number '{lexeme}'")))?)
            } else {
                Tok::Int(lexeme.parse().map_err(|_| err(tl, tc, format!("integer '{lexeme}' out of range")))?)
            }
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let (tok, len) = match two.as_str() {
                "::" => (Tok::ColonColon, 2),
                ":-" => (Tok::If, 2),
                ">=" => (Tok::Cmp(CmpOp::Ge), 2),
                "<=" | "=<" => (Tok::Cmp(CmpOp::Le), 2),
                "==" => (Tok::Cmp(CmpOp::Eq), 2),
                "!=" => (Tok::Cmp(CmpOp::Ne), 2),
                _ => match c {
                    '(' => (Tok::LParen, 1),
                    ')' => (Tok::RParen, 1),
                    ',' => (Tok::Comma, 1),
                    '.' => (Tok::Dot, 1),
                    '>' => (Tok::Cmp(CmpOp::Gt), 1),
                    '<' => (Tok::Cmp(CmpOp::Lt), 1),
                    other => return Err(err(tl, tc, format!("unexpected character '{other}'"))),
                },
            };
            bump!(len);
            tok
        };
        out.push(Spanned { tok, line: tl, column: tc });
    }
    out.push(Spanned { tok: Tok::Eof, line, column: col });
    Ok(out)
}


/***** PARSER *****/
struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    anon: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> { Ok(Self { toks: lex(text)?, pos: 0, anon: 0 }) }

    fn peek(&self) -> &Spanned { &self.toks[self.pos] }

    fn peek_at(&self, k: usize) -> &Tok { &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool { self.peek().tok == Tok::Eof }

    fn unexpected(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError::Syntax { line: t.line, column: t.column, message: format!("expected {expected}, found {}", t.tok.describe()) }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let start = self.peek().clone();
        let prob = match (&start.tok, self.peek_at(1)) {
            (Tok::Float(_) | Tok::Int(_), Tok::ColonColon) => {
                let value = match self.next().tok {
                    Tok::Float(x) => x,
                    Tok::Int(i) => i as f64,
                    _ => unreachable!(),
                };
                self.next();
                if !(0.0..=1.0).contains(&value) {
                    return Err(ParseError::ProbabilityRange { value, line: start.line, column: start.column });
                }
                value
            },
            _ => 1.0,
        };
        let head = self.atom()?;
        let mut body = Vec::new();
        if self.peek().tok == Tok::If {
            self.next();
            loop {
                body.push(self.literal()?);
                if self.peek().tok == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Dot, "',' or '.'")?;
        let clause = Clause { prob, head, body };
        if let Some(v) = clause.range_violation() {
            return Err(ParseError::RangeRestriction { variable: v.to_string(), line: start.line });
        }
        Ok(clause)
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let predicate = match &self.peek().tok {
            Tok::Ident(name) => name.clone(),
            _ => return Err(self.unexpected("a predicate name")),
        };
        self.next();
        let mut args = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.next();
            loop {
                args.push(self.term()?);
                match self.peek().tok {
                    Tok::Comma => {
                        self.next();
                    },
                    Tok::RParen => {
                        self.next();
                        break;
                    },
                    _ => return Err(self.unexpected("',' or ')'")),
                }
            }
        }
        Ok(Atom { predicate, args })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let t = match &self.peek().tok {
            Tok::Ident(s) => Term::Const(s.clone()),
            Tok::Int(i) => Term::Int(*i),
            Tok::Var(v) if v == "_" => {
                self.anon += 1;
                Term::Var(format!("_{}", self.anon - 1))
            },
            Tok::Var(v) => Term::Var(v.clone()),
            _ => return Err(self.unexpected("a term")),
        };
        self.next();
        Ok(t)
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let is_cmp = match (&self.peek().tok, self.peek_at(1)) {
            (Tok::Var(_) | Tok::Int(_), _) => true,
            (Tok::Ident(_), Tok::Cmp(_)) => true,
            _ => false,
        };
        if !is_cmp {
            return Ok(Literal::Atom(self.atom()?));
        }
        let lhs = self.term()?;
        let op = match self.peek().tok {
            Tok::Cmp(op) => op,
            _ => return Err(self.unexpected("a comparison operator")),
        };
        self.next();
        let rhs = self.term()?;
        Ok(Literal::Cmp(Comparison { op, lhs, rhs }))
    }
}

/// Parses a whole program. Clauses keep their source order.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(text)?;
    let mut clauses = Vec::new();
    while !p.at_eof() {
        clauses.push(p.clause()?);
    }
    Ok(Program::from(clauses))
}

/// Parses exactly one clause.
pub fn parse_clause(text: &str) -> Result<Clause, ParseError> {
    let mut p = Parser::new(text)?;
    let c = p.clause()?;
    if !p.at_eof() {
        return Err(p.unexpected("end of input after a single clause"));
    }
    Ok(c)
}

/// Parses a single atom such as `pass(tom)`. A trailing `.` is accepted.
pub fn parse_atom(text: &str) -> Result<Atom, ParseError> {
    let mut p = Parser::new(text)?;
    let a = p.atom()?;
    if p.peek().tok == Tok::Dot {
        p.next();
    }
    if !p.at_eof() {
        return Err(p.unexpected("end of input after an atom"));
    }
    Ok(a)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_clause_program() {
        let p = parse_program("0.2::a.\n0.3::b.\n0.5::a :- b.").unwrap();
        let probs: Vec<f64> = p.iter().map(|c| c.prob).collect();
        assert_eq!(probs, vec![0.2, 0.3, 0.5]);
        assert_eq!(p.clauses()[2].body, vec![Literal::Atom(Atom::prop("b"))]);
    }

    #[test]
    fn default_probability() {
        let p = parse_program("a.").unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.clauses()[0].prob, 1.0);
        assert!(p.clauses()[0].is_fact());
    }

    #[test]
    fn comparison_variable_must_be_bound() {
        let e = parse_program("0.5::a :- b, X >= 2.").unwrap_err();
        assert_eq!(e, ParseError::RangeRestriction { variable: "X".into(), line: 1 });
    }

    #[test]
    fn head_variable_must_be_bound() {
        assert!(matches!(parse_program("p(X)."), Err(ParseError::RangeRestriction { .. })));
    }

    #[test]
    fn probability_out_of_range() {
        let e = parse_program("a.\n1.5::b.").unwrap_err();
        assert!(matches!(e, ParseError::ProbabilityRange { line: 2, column: 1, .. }), "{e:?}");
    }

    #[test]
    fn syntax_error_position() {
        let e = parse_program("0.2::a.\n0.3::b :- .").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 2, column: 11, .. }), "{e:?}");
        assert!(matches!(parse_program("0.2::a"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("0.2::a # b."), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn comments_and_integers() {
        let text = "% Bob's knowledge\n0.8::mark(tom,75). % from Eve\n1.0::pass(X) :- mark(X,M), pass_score(S), M >=S.\n";
        let p = parse_program(text).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.clauses()[0].head.args, vec![Term::Const("tom".into()), Term::Int(75)]);
        assert!(matches!(&p.clauses()[1].body[2], Literal::Cmp(Comparison { op: CmpOp::Ge, .. })));
    }

    #[test]
    fn exponent_probabilities() {
        let c = parse_clause("1e-7::rare.").unwrap();
        assert_eq!(c.prob, 1e-7);
        assert_eq!(parse_clause(&c.to_string()).unwrap(), c);
        assert_eq!(parse_clause("1::a.").unwrap().prob, 1.0);
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let c = parse_clause("p(X) :- q(X,_), r(_).").unwrap();
        let names: Vec<&str> = c.body_atoms().flat_map(Atom::variables).collect();
        assert_eq!(names, vec!["X", "_0", "_1"]);
    }

    #[test]
    fn atoms() {
        assert_eq!(parse_atom("pass(tom)").unwrap(), Atom::new("pass", vec![Term::Const("tom".into())]));
        assert_eq!(parse_atom("a.").unwrap(), Atom::prop("a"));
        assert!(parse_atom("a b").is_err());
        assert!(parse_atom("X").is_err());
    }
}
