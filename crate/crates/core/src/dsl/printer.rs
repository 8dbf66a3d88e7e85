use super::ast::{Expr, ExprKind, Literal, Step, StepKind};

/// Canonical form: `, ` between items, `: ` after argument names, nothing
/// else between tokens.
pub fn print(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, expr);
    out
}

fn write_expr(out: &mut String, expr: &Expr) {
    match &expr.kind {
        ExprKind::Chain(steps) => write_steps(out, steps),
        ExprKind::Literal(lit) => write_literal(out, lit),
        ExprKind::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, item);
            }
            out.push(']');
        }
        ExprKind::Accessor(steps) => {
            out.push('.');
            write_steps(out, steps);
        }
    }
}

fn write_steps(out: &mut String, steps: &[Step]) {
    for (i, step) in steps.iter().enumerate() {
        match &step.kind {
            StepKind::Index(position) => {
                out.push('[');
                out.push_str(&position.to_string());
                out.push(']');
            }
            StepKind::Member(name) => {
                if i > 0 {
                    out.push('.');
                }
                out.push_str(name);
            }
            StepKind::Call { name, args } => {
                if i > 0 {
                    out.push('.');
                }
                out.push_str(name);
                out.push('(');
                for (j, arg) in args.iter().enumerate() {
                    if j > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&arg.name);
                    out.push_str(": ");
                    write_expr(out, &arg.value);
                }
                out.push(')');
            }
        }
    }
}

pub fn write_literal(out: &mut String, lit: &Literal) {
    match lit {
        Literal::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Literal::Int(v) => out.push_str(&v.to_string()),
        Literal::Float(v) => out.push_str(&format_float(*v)),
        Literal::Str(s) => {
            out.push('"');
            for c in s.chars() {
                if matches!(c, '"' | '\\') {
                    out.push('\\');
                }
                out.push(c);
            }
            out.push('"');
        }
    }
}

/// Shortest round-tripping decimal, always with a fractional part so it
/// re-lexes as a float. Never uses exponent notation.
pub fn format_float(v: f64) -> String {
    let mut s = v.to_string();
    if !s.contains('.') {
        s.push_str(".0");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn canonical_spacing() {
        let e = parse("DateTime.Current.offset(week:-1).set(weekOfTheDay:4)").unwrap();
        assert_eq!(
            print(&e),
            "DateTime.Current.offset(week: -1).set(weekOfTheDay: 4)"
        );
        let e = parse(" [ 1 ,2,  .name ] ").unwrap();
        assert_eq!(print(&e), "[1, 2, .name]");
    }

    #[test]
    fn literals() {
        assert_eq!(print(&Expr::literal(Literal::Int(0))), "0");
        assert_eq!(print(&Expr::literal(Literal::Float(5.0))), "5.0");
        assert_eq!(print(&Expr::literal(Literal::Float(1e-7))), "0.0000001");
        assert_eq!(print(&Expr::literal(Literal::Float(-0.5))), "-0.5");
        assert_eq!(
            print(&Expr::literal(Literal::Str("say \"hi\" \\".into()))),
            r#""say \"hi\" \\""#
        );
    }

    #[test]
    fn float_extremes_round_trip() {
        for v in [f64::MAX, f64::MIN_POSITIVE, 1e300, 123456.789, -0.0] {
            let e = Expr::literal(Literal::Float(v));
            assert_eq!(parse(&print(&e)).unwrap(), e, "{v}");
        }
        for v in [i64::MIN, i64::MAX, 0] {
            let e = Expr::literal(Literal::Int(v));
            assert_eq!(parse(&print(&e)).unwrap(), e);
        }
    }
}
