//! Recursive-descent parser for the command grammar:
//!
//! ```text
//! top            ::= value | all_symbol
//! all_symbol     ::= index_symbol ( . all_symbol )?
//! index_symbol   ::= function_call | symbol ( [ int_literal ] )?
//! function_call  ::= symbol ( parameter_list? )
//! parameter_list ::= parameter_pair ( , parameter_pair )*
//! parameter_pair ::= symbol : value
//! value          ::= true | false | int_literal | float_literal | all_symbol
//!                  | accessor | " string " | [ array_value ]
//! accessor       ::= . value
//! array_value    ::= value ( , value )*
//! ```
//!
//! Calls may also carry an index (`Restaurant.All()[0]`).

use std::collections::HashSet;

use super::ast::{Expr, ExprKind, Literal, NamedArg, SourceSpan, Step, StepKind};
use super::lexer::{tokenize, Spanned, Token};
use super::SyntaxError;

pub const MAX_DEPTH: usize = 64;

const VALUE_START: [&str; 8] = [
    "`true`",
    "`false`",
    "integer",
    "float",
    "string literal",
    "identifier",
    "`.`",
    "`[`",
];

pub fn parse(source: &str) -> Result<Expr, SyntaxError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.value(0)?;
    parser.expect_eof()?;
    Ok(expr)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn unexpected<const N: usize>(&self, expected: [&str; N]) -> SyntaxError {
        let tok = self.peek();
        SyntaxError::new(format!("unexpected {}", tok.token.describe()), tok.span)
            .expecting(expected)
            .found(tok.token.describe())
    }

    fn expect(&mut self, token: Token, label: &str) -> Result<Spanned, SyntaxError> {
        if self.peek().token == token {
            Ok(self.bump())
        } else {
            Err(self.unexpected([label]))
        }
    }

    fn expect_eof(&self) -> Result<(), SyntaxError> {
        match self.peek().token {
            Token::Eof => Ok(()),
            Token::Dot | Token::LBracket => Err(self.unexpected(["end of input"])),
            _ => Err(self.unexpected(["end of input", "`.`"])),
        }
    }

    fn value(&mut self, depth: usize) -> Result<Expr, SyntaxError> {
        if depth > MAX_DEPTH {
            return Err(SyntaxError::new(
                format!("expression nested deeper than {MAX_DEPTH} levels"),
                self.peek().span,
            ));
        }
        let tok = self.peek().clone();
        let lit = |lit| Expr {
            kind: ExprKind::Literal(lit),
            span: tok.span,
        };
        match tok.token {
            Token::True => {
                self.bump();
                Ok(lit(Literal::Bool(true)))
            }
            Token::False => {
                self.bump();
                Ok(lit(Literal::Bool(false)))
            }
            Token::Int(v) => {
                self.bump();
                Ok(lit(Literal::Int(v)))
            }
            Token::Float(v) => {
                self.bump();
                Ok(lit(Literal::Float(v)))
            }
            Token::Str(ref s) => {
                self.bump();
                Ok(lit(Literal::Str(s.clone())))
            }
            Token::LBracket => self.array(depth),
            Token::Dot => {
                self.bump();
                if !matches!(self.peek().token, Token::Ident(_)) {
                    return Err(self.unexpected(["identifier"]));
                }
                let (steps, span) = self.chain(depth + 1)?;
                Ok(Expr {
                    kind: ExprKind::Accessor(steps),
                    span: tok.span.join(span),
                })
            }
            Token::Ident(_) => {
                let (steps, span) = self.chain(depth)?;
                Ok(Expr {
                    kind: ExprKind::Chain(steps),
                    span,
                })
            }
            _ => Err(self.unexpected(VALUE_START)),
        }
    }

    fn array(&mut self, depth: usize) -> Result<Expr, SyntaxError> {
        let open = self.bump();
        let mut items = vec![self.value(depth + 1)?];
        loop {
            match self.peek().token {
                Token::Comma => {
                    self.bump();
                    items.push(self.value(depth + 1)?);
                }
                Token::RBracket => {
                    let close = self.bump();
                    return Ok(Expr {
                        kind: ExprKind::Array(items),
                        span: open.span.join(close.span),
                    });
                }
                _ => return Err(self.unexpected(["`,`", "`]`"])),
            }
        }
    }

    /// One or more `.`-separated index symbols. The caller guarantees the
    /// current token is an identifier.
    fn chain(&mut self, depth: usize) -> Result<(Vec<Step>, SourceSpan), SyntaxError> {
        let mut steps = Vec::new();
        loop {
            let ident = self.bump();
            let Token::Ident(name) = ident.token else {
                unreachable!("chain() entered on a non-identifier");
            };
            if self.peek().token == Token::LParen {
                self.bump();
                let args = self.arguments(depth + 1)?;
                let close = self.expect(Token::RParen, "`)`")?;
                steps.push(Step {
                    kind: StepKind::Call { name, args },
                    span: ident.span.join(close.span),
                });
            } else {
                steps.push(Step {
                    kind: StepKind::Member(name),
                    span: ident.span,
                });
            }
            if self.peek().token == Token::LBracket {
                let open = self.bump();
                let position = match self.peek().token {
                    Token::Int(v) => v,
                    _ => return Err(self.unexpected(["integer"])),
                };
                self.bump();
                let close = self.expect(Token::RBracket, "`]`")?;
                steps.push(Step {
                    kind: StepKind::Index(position),
                    span: open.span.join(close.span),
                });
            }
            if self.peek().token == Token::Dot {
                self.bump();
                if !matches!(self.peek().token, Token::Ident(_)) {
                    return Err(self.unexpected(["identifier"]));
                }
                continue;
            }
            break;
        }
        let span = steps[0].span.join(steps[steps.len() - 1].span);
        Ok((steps, span))
    }

    fn arguments(&mut self, depth: usize) -> Result<Vec<NamedArg>, SyntaxError> {
        let mut args: Vec<NamedArg> = Vec::new();
        let mut seen = HashSet::new();
        if self.peek().token == Token::RParen {
            return Ok(args);
        }
        loop {
            let name_tok = self.peek().clone();
            let Token::Ident(name) = name_tok.token else {
                return Err(self.unexpected(["parameter name", "`)`"]));
            };
            // Arguments must be named: `f(x)` is rejected here.
            if self.tokens[self.pos + 1].token != Token::Colon {
                self.bump();
                return Err(self.unexpected(["`:`"]));
            }
            self.bump();
            self.bump();
            let value = self.value(depth)?;
            if !seen.insert(name.clone()) {
                return Err(SyntaxError::new(
                    format!("duplicate argument `{name}`"),
                    name_tok.span,
                ));
            }
            let span = name_tok.span.join(value.span);
            args.push(NamedArg { name, value, span });
            match self.peek().token {
                Token::Comma => {
                    self.bump();
                }
                Token::RParen => return Ok(args),
                _ => return Err(self.unexpected(["`,`", "`)`"])),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(name: &str, args: Vec<NamedArg>) -> Step {
        Step::call(name, args)
    }

    fn chain(steps: Vec<Step>) -> Expr {
        Expr::chain(steps)
    }

    #[test]
    fn create_order_chain() {
        let e = parse("Order.CreateOrder().addItem(foodItem: food)").unwrap();
        let expected = chain(vec![
            Step::member("Order"),
            call("CreateOrder", vec![]),
            call(
                "addItem",
                vec![NamedArg::new("foodItem", chain(vec![Step::member("food")]))],
            ),
        ]);
        assert_eq!(e, expected);
    }

    #[test]
    fn pizza_hut_deals() {
        let e = parse(
            r#"Restaurant.GetRestaurant(name: "pizza hut").getFoodItems().between(field: .price, from: 0, to: 5)"#,
        )
        .unwrap();
        let ExprKind::Chain(steps) = &e.kind else {
            panic!("expected chain");
        };
        assert_eq!(steps.len(), 4);
        let StepKind::Call { name, args } = &steps[3].kind else {
            panic!("expected call");
        };
        assert_eq!(name, "between");
        assert_eq!(
            args[0].value,
            Expr::new(ExprKind::Accessor(vec![Step::member("price")]))
        );
        assert_eq!(args[1].value, Expr::literal(Literal::Int(0)));
        assert_eq!(args[2].value, Expr::literal(Literal::Int(5)));
    }

    #[test]
    fn comparison_value_is_rejected_at_operator() {
        let src = "Restaurant.All().matching(field: .deliveryFee, value: < 25)";
        let err = parse(src).unwrap_err();
        assert_eq!(err.span.start, src.find('<').unwrap());
        assert!(err.expected.iter().any(|e| e == "identifier"));
    }

    #[test]
    fn bare_true_is_literal() {
        assert_eq!(parse("true").unwrap(), Expr::literal(Literal::Bool(true)));
        assert_eq!(parse(" false ").unwrap(), Expr::literal(Literal::Bool(false)));
    }

    #[test]
    fn unnamed_arguments_are_rejected() {
        assert!(parse(r#"Order.GetActiveCart().addItem([Food.Named("hamburger")])"#).is_err());
        assert!(parse("a.f(x)").is_err());
        assert!(parse("a.f(x: 1, 2)").is_err());
        assert!(parse("a.f(1)").is_err());
    }

    #[test]
    fn index_after_call_and_member() {
        let e = parse("Restaurant.All()[-1].items[0]").unwrap();
        let ExprKind::Chain(steps) = e.kind else {
            panic!()
        };
        assert_eq!(steps[2], Step::index(-1));
        assert_eq!(steps[4], Step::index(0));
        assert!(parse("a[0][1]").is_err());
        assert!(parse("a[x]").is_err());
        assert!(parse("a[1.5]").is_err());
    }

    #[test]
    fn duplicate_argument_names_are_rejected() {
        let err = parse("a.f(x: 1, x: 2)").unwrap_err();
        assert!(err.message.contains("duplicate"));
    }

    #[test]
    fn misc_rejections() {
        for src in ["", "a.", "a..b", "[]", "a.f(", "true.x", "1 2", "a;b", "(a)", ".5.x"] {
            assert!(parse(src).is_err(), "{src:?} should be rejected");
        }
    }

    #[test]
    fn depth_limit() {
        let deep = "[".repeat(200) + "1" + &"]".repeat(200);
        let err = parse(&deep).unwrap_err();
        assert!(err.message.contains("nested"));
        let ok = "[".repeat(30) + "1" + &"]".repeat(30);
        assert!(parse(&ok).is_ok());
    }

    #[test]
    fn spans_cover_nodes() {
        let src = "Order.Get(id: \"o1\")";
        let e = parse(src).unwrap();
        assert_eq!(e.span, SourceSpan::new(0, src.chars().count()));
    }
}
