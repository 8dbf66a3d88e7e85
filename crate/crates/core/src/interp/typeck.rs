use super::{
    ArgValue, Builtin, StepOp, TypeError, TypeErrorKind, TypedArg, TypedExpr, TypedKind,
    TypedStep,
};
use crate::datetime;
use crate::dsl::{print, Expr, ExprKind, NamedArg, SourceSpan, Step, StepKind};
use crate::registry::{ClassDescriptor, FunctionDescriptor, ParamDescriptor, Registry};
use crate::types::TypeRef;
use crate::value::Value;

/// Resolve every step of `expr` against `registry`.
pub fn type_check(expr: &Expr, registry: &Registry) -> Result<TypedExpr, TypeError> {
    Checker { registry }.expr(expr, None)
}

struct Checker<'r> {
    registry: &'r Registry,
}

enum Cursor {
    Static(String),
    Value(TypeRef),
}

fn err(kind: TypeErrorKind, span: SourceSpan) -> TypeError {
    TypeError::new(kind, span)
}

fn unknown_member(owner: impl ToString, member: &str, span: SourceSpan) -> TypeError {
    err(
        TypeErrorKind::UnknownMember {
            owner: owner.to_string(),
            member: member.to_string(),
        },
        span,
    )
}

fn mismatch(expected: impl ToString, found: impl ToString, context: impl ToString, span: SourceSpan) -> TypeError {
    err(
        TypeErrorKind::TypeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
            context: context.to_string(),
        },
        span,
    )
}

fn callable_without_args(f: &FunctionDescriptor) -> bool {
    f.params.iter().all(|p| p.default.is_some())
}

impl Checker<'_> {
    fn class(&self, name: &str, span: SourceSpan) -> Result<&ClassDescriptor, TypeError> {
        self.registry
            .class(name)
            .ok_or_else(|| err(TypeErrorKind::UnknownClass(name.to_string()), span))
    }

    fn expr(&self, expr: &Expr, expected: Option<&TypeRef>) -> Result<TypedExpr, TypeError> {
        let span = expr.span;
        match &expr.kind {
            ExprKind::Literal(lit) => {
                let value = Value::from_literal(lit);
                let ty = match &value {
                    Value::Bool(_) => TypeRef::Boolean,
                    Value::Int(_) => TypeRef::Integer,
                    Value::Float(_) => TypeRef::Float,
                    _ => TypeRef::String,
                };
                Ok(TypedExpr {
                    kind: TypedKind::Literal(value),
                    ty,
                    span,
                })
            }
            ExprKind::Array(items) => {
                let elem_expected = expected.and_then(TypeRef::element);
                let mut typed = Vec::with_capacity(items.len());
                let mut elem_ty: Option<TypeRef> = None;
                for item in items {
                    let t = self.expr(item, elem_expected)?;
                    if t.ty == TypeRef::Void {
                        return Err(mismatch("a value", "Void", "array element", t.span));
                    }
                    elem_ty = match elem_ty {
                        None => Some(t.ty.clone()),
                        Some(prev) => Some(
                            prev.unify(&t.ty)
                                .ok_or_else(|| mismatch(&prev, &t.ty, "array element", t.span))?,
                        ),
                    };
                    typed.push(t);
                }
                Ok(TypedExpr {
                    kind: TypedKind::Array(typed),
                    ty: TypeRef::list_of(elem_ty.expect("arrays are non-empty")),
                    span,
                })
            }
            ExprKind::Accessor(steps) => match expected {
                Some(TypeRef::FieldPath(root)) => {
                    let (path, _) = self.field_path(root, steps, span)?;
                    Ok(TypedExpr {
                        kind: TypedKind::FieldPath {
                            root: root.clone(),
                            path,
                        },
                        ty: TypeRef::FieldPath(root.clone()),
                        span,
                    })
                }
                Some(other) => Err(mismatch(other, "a field accessor", "argument", span)),
                None => Err(mismatch("a value", "a field accessor", "command", span)),
            },
            ExprKind::Chain(steps) => self.chain(steps, span),
        }
    }

    /// Resolve `.a.b` from `root`; returns canonical names and the leaf type.
    fn field_path(
        &self,
        root: &str,
        steps: &[Step],
        span: SourceSpan,
    ) -> Result<(Vec<String>, TypeRef), TypeError> {
        let mut ty = TypeRef::class(root);
        let mut path = Vec::with_capacity(steps.len());
        for step in steps {
            let field = match &step.kind {
                StepKind::Member(name) => name.as_str(),
                StepKind::Call { name, .. } => name.as_str(),
                StepKind::Index(i) => {
                    return Err(err(
                        TypeErrorKind::FieldNotOnClass {
                            class: ty.to_string(),
                            field: format!("[{i}]"),
                        },
                        span,
                    ))
                }
            };
            let not_on = |class: &str| {
                err(
                    TypeErrorKind::FieldNotOnClass {
                        class: class.to_string(),
                        field: field.to_string(),
                    },
                    step.span,
                )
            };
            let class = match &ty {
                TypeRef::Class(c) => c.clone(),
                other => return Err(not_on(&other.to_string())),
            };
            let desc = self.class(&class, span)?;
            let prop = desc
                .find_property(field)
                .filter(|p| p.genie_exposed && matches!(step.kind, StepKind::Member(_)))
                .ok_or_else(|| not_on(&class))?;
            path.push(prop.name.clone());
            ty = prop.value_type.clone();
        }
        Ok((path, ty))
    }

    fn chain(&self, steps: &[Step], span: SourceSpan) -> Result<TypedExpr, TypeError> {
        let head = &steps[0];
        let (mut cursor, rest_from) = match &head.kind {
            StepKind::Member(name) if self.registry.contains(name) => {
                (Cursor::Static(name.clone()), 1)
            }
            StepKind::Member(name) | StepKind::Call { name, .. } => {
                return Err(err(TypeErrorKind::UnknownClass(name.clone()), head.span))
            }
            StepKind::Index(_) => {
                return Err(err(TypeErrorKind::IndexOnNonList("nothing".into()), head.span))
            }
        };
        if steps.len() == 1 {
            if let Cursor::Static(class) = cursor {
                return Err(mismatch("a value", format!("class `{class}`"), "command", span));
            }
        }

        let mut typed = Vec::with_capacity(steps.len() - rest_from);
        for (i, step) in steps.iter().enumerate().skip(rest_from) {
            let label = print(&Expr::chain(steps[..=i].to_vec()));
            let (op, ty) = self.step(&cursor, step)?;
            cursor = Cursor::Value(ty.clone());
            typed.push(TypedStep {
                op,
                ty,
                span: step.span,
                label,
            });
        }
        let ty = typed.last().expect("at least one step").ty.clone();
        Ok(TypedExpr {
            kind: TypedKind::Chain(typed),
            ty,
            span,
        })
    }

    fn step(&self, cursor: &Cursor, step: &Step) -> Result<(StepOp, TypeRef), TypeError> {
        let span = step.span;
        match cursor {
            Cursor::Static(class) => {
                let desc = self.class(class, span)?;
                match &step.kind {
                    StepKind::Index(_) => Err(err(
                        TypeErrorKind::IndexOnNonList(format!("class `{class}`")),
                        span,
                    )),
                    StepKind::Member(name) => {
                        let f = desc
                            .find_function(name)
                            .filter(|f| f.is_static && f.genie_exposed && callable_without_args(f))
                            .ok_or_else(|| unknown_member(class, name, span))?;
                        let args = self.bind(class, f, &[], span)?;
                        Ok(static_op(class, f, args))
                    }
                    StepKind::Call { name, args } => {
                        let f = desc
                            .find_function(name)
                            .filter(|f| f.is_static && f.genie_exposed)
                            .ok_or_else(|| unknown_member(class, name, span))?;
                        let args = self.bind(class, f, args, span)?;
                        Ok(static_op(class, f, args))
                    }
                }
            }
            Cursor::Value(ty) => match (ty, &step.kind) {
                (TypeRef::ListOf(elem), StepKind::Index(i)) => {
                    Ok((StepOp::Index(*i), (**elem).clone()))
                }
                (other, StepKind::Index(_)) => Err(err(
                    TypeErrorKind::IndexOnNonList(other.to_string()),
                    span,
                )),
                (TypeRef::ListOf(elem), StepKind::Call { name, args }) => {
                    let builtin = Builtin::from_name(name)
                        .ok_or_else(|| unknown_member(ty, name, span))?;
                    self.builtin(builtin, elem, args, span)
                }
                (TypeRef::Class(class), StepKind::Member(name)) => {
                    let desc = self.class(class, span)?;
                    if let Some(p) = desc.find_property(name).filter(|p| p.genie_exposed) {
                        return Ok((
                            StepOp::Property {
                                class: class.clone(),
                                property: p.name.clone(),
                            },
                            p.value_type.clone(),
                        ));
                    }
                    let f = desc
                        .find_function(name)
                        .filter(|f| !f.is_static && f.genie_exposed && callable_without_args(f))
                        .ok_or_else(|| unknown_member(class, name, span))?;
                    let args = self.bind(class, f, &[], span)?;
                    Ok(method_op(class, f, args))
                }
                (TypeRef::Class(class), StepKind::Call { name, args }) => {
                    let desc = self.class(class, span)?;
                    let f = desc
                        .find_function(name)
                        .filter(|f| !f.is_static && f.genie_exposed)
                        .ok_or_else(|| unknown_member(class, name, span))?;
                    let args = self.bind(class, f, args, span)?;
                    Ok(method_op(class, f, args))
                }
                (other, StepKind::Member(name) | StepKind::Call { name, .. }) => {
                    Err(unknown_member(other, name, span))
                }
            },
        }
    }

    fn check_names(
        &self,
        function: &str,
        declared: &[&str],
        args: &[NamedArg],
    ) -> Result<(), TypeError> {
        for arg in args {
            if !declared.contains(&arg.name.as_str()) {
                return Err(err(
                    TypeErrorKind::ParamNameMismatch {
                        function: function.to_string(),
                        name: arg.name.clone(),
                        expected: declared.iter().map(|s| s.to_string()).collect(),
                    },
                    arg.span,
                ));
            }
        }
        Ok(())
    }

    fn given_arg(
        &self,
        function: &str,
        param: &str,
        ty: &TypeRef,
        arg: &NamedArg,
    ) -> Result<TypedExpr, TypeError> {
        let typed = self.expr(&arg.value, Some(ty))?;
        if !typed.ty.assignable_to(ty) {
            return Err(mismatch(
                ty,
                &typed.ty,
                format!("argument `{param}` of `{function}`"),
                arg.span,
            ));
        }
        Ok(typed)
    }

    fn bind(
        &self,
        class: &str,
        f: &FunctionDescriptor,
        args: &[NamedArg],
        span: SourceSpan,
    ) -> Result<Vec<TypedArg>, TypeError> {
        let function = format!("{class}.{}", f.name);
        let declared: Vec<&str> = f.params.iter().map(|p| p.name.as_str()).collect();
        self.check_names(&function, &declared, args)?;
        f.params
            .iter()
            .map(|p: &ParamDescriptor| {
                let value = match args.iter().find(|a| a.name == p.name) {
                    Some(arg) => ArgValue::Given(self.given_arg(&function, &p.name, &p.ty, arg)?),
                    None => ArgValue::Default(p.default.clone().ok_or_else(|| {
                        err(
                            TypeErrorKind::MissingParam {
                                function: function.clone(),
                                param: p.name.clone(),
                            },
                            span,
                        )
                    })?),
                };
                Ok(TypedArg {
                    param: p.name.clone(),
                    ty: p.ty.clone(),
                    value,
                })
            })
            .collect()
    }

    fn builtin(
        &self,
        builtin: Builtin,
        elem: &TypeRef,
        args: &[NamedArg],
        span: SourceSpan,
    ) -> Result<(StepOp, TypeRef), TypeError> {
        let name = builtin.name();
        self.check_names(name, builtin.params(), args)?;
        let list = TypeRef::list_of(elem.clone());
        if builtin == Builtin::Count {
            return Ok((StepOp::Builtin { builtin, args: vec![] }, TypeRef::Integer));
        }

        let class = match elem {
            TypeRef::Class(c) => c.clone(),
            other => {
                return Err(mismatch(
                    "a list of objects",
                    TypeRef::list_of(other.clone()),
                    format!("receiver of `{name}`"),
                    span,
                ))
            }
        };
        let field_ty = TypeRef::FieldPath(class.clone());
        let field_arg = args.iter().find(|a| a.name == "field").ok_or_else(|| {
            err(
                TypeErrorKind::MissingParam {
                    function: name.to_string(),
                    param: "field".into(),
                },
                span,
            )
        })?;
        let (path, leaf) = match &field_arg.value.kind {
            ExprKind::Accessor(steps) => self.field_path(&class, steps, field_arg.value.span)?,
            _ => {
                let found = self.expr(&field_arg.value, None).map(|t| t.ty.to_string());
                return Err(mismatch(
                    &field_ty,
                    found.unwrap_or_else(|_| "an expression".into()),
                    format!("argument `field` of `{name}`"),
                    field_arg.span,
                ));
            }
        };
        let mut typed = vec![TypedArg {
            param: "field".into(),
            ty: field_ty.clone(),
            value: ArgValue::Given(TypedExpr {
                kind: TypedKind::FieldPath {
                    root: class.clone(),
                    path,
                },
                ty: field_ty,
                span: field_arg.value.span,
            }),
        }];

        let comparable = leaf.is_numeric()
            || matches!(leaf, TypeRef::String | TypeRef::Boolean)
            || leaf == TypeRef::class(datetime::CLASS);
        let ordered = leaf.is_numeric() || leaf == TypeRef::class(datetime::CLASS);
        let numeric_bound = |param: &str| -> Result<TypedArg, TypeError> {
            let arg = args.iter().find(|a| a.name == param).ok_or_else(|| {
                err(
                    TypeErrorKind::MissingParam {
                        function: name.to_string(),
                        param: param.to_string(),
                    },
                    span,
                )
            })?;
            let t = self.expr(&arg.value, Some(&leaf))?;
            let ok = t.ty.assignable_to(&leaf) || (leaf.is_numeric() && t.ty.is_numeric());
            if !ok {
                return Err(mismatch(&leaf, &t.ty, format!("argument `{param}` of `{name}`"), arg.span));
            }
            Ok(TypedArg {
                param: param.to_string(),
                ty: leaf.clone(),
                value: ArgValue::Given(t),
            })
        };

        let result = match builtin {
            Builtin::Matching => {
                typed.push(numeric_bound("value")?);
                list
            }
            Builtin::Between => {
                if !ordered {
                    return Err(mismatch(
                        "a numeric or DateTime field",
                        &leaf,
                        "field of `between`",
                        field_arg.span,
                    ));
                }
                typed.push(numeric_bound("from")?);
                typed.push(numeric_bound("to")?);
                list
            }
            Builtin::Sort => {
                if !comparable {
                    return Err(mismatch("a sortable field", &leaf, "field of `sort`", field_arg.span));
                }
                let value = match args.iter().find(|a| a.name == "ascending") {
                    Some(arg) => ArgValue::Given(self.given_arg(name, "ascending", &TypeRef::Boolean, arg)?),
                    None => ArgValue::Default(Value::Bool(true)),
                };
                typed.push(TypedArg {
                    param: "ascending".into(),
                    ty: TypeRef::Boolean,
                    value,
                });
                list
            }
            Builtin::Sum | Builtin::Average => {
                if !leaf.is_numeric() {
                    return Err(err(
                        TypeErrorKind::NonNumericAggregate {
                            builtin: name.to_string(),
                            field_type: leaf.to_string(),
                        },
                        field_arg.span,
                    ));
                }
                if builtin == Builtin::Sum {
                    leaf.clone()
                } else {
                    TypeRef::Float
                }
            }
            Builtin::Count => unreachable!(),
        };
        Ok((StepOp::Builtin { builtin, args: typed }, result))
    }
}

fn static_op(class: &str, f: &FunctionDescriptor, args: Vec<TypedArg>) -> (StepOp, TypeRef) {
    (
        StepOp::Static {
            class: class.to_string(),
            function: Box::new(f.clone()),
            args,
        },
        f.return_type.clone(),
    )
}

fn method_op(class: &str, f: &FunctionDescriptor, args: Vec<TypedArg>) -> (StepOp, TypeRef) {
    (
        StepOp::Method {
            class: class.to_string(),
            function: Box::new(f.clone()),
            args,
        },
        f.return_type.clone(),
    )
}
