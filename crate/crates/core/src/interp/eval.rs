use super::builtins;
use super::{
    ArgValue, Builtin, EvalError, ExecutionTrace, StepOp, TypedArg, TypedExpr, TypedKind,
    TypedStep,
};
use crate::datetime::{self, Clock};
use crate::registry::{Args, FunctionDescriptor, FunctionImpl, HostCtx, HostError, StateStore};
use crate::ui::{resolve_current, ScreenSnapshot, TapCursor, TapPoint};
use crate::value::{InstanceRef, Value};

/// Everything outside the store that evaluation may consult.
pub struct EvalContext<'a> {
    pub clock: &'a dyn Clock,
    pub screen: &'a ScreenSnapshot,
    pub taps: &'a [TapPoint],
}

/// Run a checked command inside one store transaction. On error every write
/// made by earlier steps is rolled back.
pub fn evaluate(
    expr: &TypedExpr,
    store: &mut StateStore,
    ctx: &EvalContext<'_>,
) -> Result<(Value, ExecutionTrace), EvalError> {
    let screen = ctx.screen.live(store);
    store.transaction(|store| {
        let mut ev = Evaluator {
            store,
            clock: ctx.clock,
            screen: &screen,
            taps: ctx.taps,
            cursor: TapCursor::new(),
        };
        let mut trace = ExecutionTrace::default();
        let value = match &expr.kind {
            TypedKind::Chain(steps) => ev.chain(steps, Some(&mut trace))?,
            _ => {
                let value = ev.expr(expr)?;
                trace.push(&value.to_string(), value.clone(), &expr.ty);
                value
            }
        };
        Ok((value, trace))
    })
}

struct Evaluator<'a, 's> {
    store: &'s mut StateStore,
    clock: &'a dyn Clock,
    screen: &'a ScreenSnapshot,
    taps: &'a [TapPoint],
    cursor: TapCursor,
}

fn failed(step: &TypedStep, code: &str, message: impl Into<String>) -> EvalError {
    EvalError::Execution {
        step: step.label.clone(),
        code: code.to_string(),
        message: message.into(),
        span: step.span,
    }
}

fn host_failed(step: &TypedStep, e: HostError) -> EvalError {
    failed(step, &e.code, e.message)
}

fn class_of(value: &Value) -> Option<&str> {
    match value {
        Value::Instance(r) => Some(&r.class),
        Value::DateTime(_) => Some(datetime::CLASS),
        _ => None,
    }
}

impl Evaluator<'_, '_> {
    fn expr(&mut self, expr: &TypedExpr) -> Result<Value, EvalError> {
        match &expr.kind {
            TypedKind::Literal(v) => Ok(v.clone()),
            TypedKind::Array(items) => {
                let values = items
                    .iter()
                    .map(|i| self.expr(i))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(expr.ty.coerce(&Value::Array(values.clone())).unwrap_or(Value::Array(values)))
            }
            TypedKind::FieldPath { path, .. } => Ok(Value::FieldPath(path.clone())),
            TypedKind::Chain(steps) => self.chain(steps, None),
        }
    }

    fn chain(
        &mut self,
        steps: &[TypedStep],
        mut trace: Option<&mut ExecutionTrace>,
    ) -> Result<Value, EvalError> {
        let mut current = Value::Void;
        for step in steps {
            current = self.step(step, current)?;
            if let Some(trace) = trace.as_deref_mut() {
                trace.push(&step.label, current.clone(), &step.ty);
            }
        }
        Ok(current)
    }

    fn step(&mut self, step: &TypedStep, receiver: Value) -> Result<Value, EvalError> {
        match &step.op {
            StepOp::Static {
                class,
                function,
                args,
            } => self.call(step, class, function, &Value::Void, args),
            StepOp::Method {
                class,
                function,
                args,
            } => {
                if receiver.is_void() {
                    return Err(failed(step, "MissingValue", "the receiver has no value"));
                }
                self.call(step, class, function, &receiver, args)
            }
            StepOp::Property { class, property } => self
                .read_property(&receiver, class, property)
                .map_err(|e| host_failed(step, e)),
            StepOp::Index(i) => {
                let items = match receiver {
                    Value::Array(items) => items,
                    other => return Err(failed(step, "TypeError", format!("{other} is not a list"))),
                };
                let len = items.len();
                let at = if *i < 0 { len as i64 + i } else { *i };
                if at < 0 || at >= len as i64 {
                    return Err(EvalError::IndexOutOfBounds {
                        index: *i,
                        len,
                        span: step.span,
                    });
                }
                Ok(items.into_iter().nth(at as usize).expect("checked bounds"))
            }
            StepOp::Builtin { builtin, args } => self.builtin(step, *builtin, receiver, args),
        }
    }

    fn arg_values(&mut self, args: &[TypedArg]) -> Result<Vec<Value>, EvalError> {
        args.iter()
            .map(|a| {
                let v = match &a.value {
                    ArgValue::Given(e) => self.expr(e)?,
                    ArgValue::Default(v) => v.clone(),
                };
                Ok(a.ty.coerce(&v).unwrap_or(v))
            })
            .collect()
    }

    fn call(
        &mut self,
        step: &TypedStep,
        class: &str,
        function: &FunctionDescriptor,
        receiver: &Value,
        args: &[TypedArg],
    ) -> Result<Value, EvalError> {
        let values = self.arg_values(args)?;
        match &function.implementation {
            FunctionImpl::Host(f) => {
                let mut ctx = HostCtx {
                    store: &mut *self.store,
                    clock: self.clock,
                };
                f(&mut ctx, receiver, &Args::new(&function.params, values))
                    .map_err(|e| host_failed(step, e))
            }
            FunctionImpl::Get => {
                let id = values
                    .first()
                    .and_then(Value::as_str)
                    .ok_or_else(|| failed(step, "ArgumentError", "id must be a string"))?;
                let r = InstanceRef::new(class, id);
                if self.store.exists(&r) {
                    Ok(Value::Instance(r))
                } else {
                    Err(failed(step, "UnknownInstance", format!("no {class} with id `{id}`")))
                }
            }
            FunctionImpl::Current => resolve_current(class, self.taps, self.screen, &mut self.cursor)
                .map(Value::Instance)
                .map_err(|_| EvalError::CurrentUnresolved {
                    class: class.to_string(),
                    span: step.span,
                }),
            FunctionImpl::Unimplemented => Err(failed(
                step,
                "Unimplemented",
                format!("{class}.{} has no implementation", function.name),
            )),
        }
    }

    fn read_property(&self, receiver: &Value, class: &str, property: &str) -> Result<Value, HostError> {
        match receiver {
            Value::Instance(r) => Ok(self.store.get_property(r, property)?),
            Value::Void => Err(HostError::new("MissingValue", format!("no {class} to read `{property}` from"))),
            other => {
                let getter = self
                    .store
                    .registry()
                    .class(class)
                    .and_then(|c| c.find_property(property))
                    .and_then(|p| p.getter.clone())
                    .ok_or_else(|| HostError::new("UnknownProperty", format!("{other} has no `{property}`")))?;
                getter(self.store, other)
            }
        }
    }

    /// Field value of `item` along `path`; unset links yield `Void`.
    fn field_value(&self, item: &Value, path: &[String]) -> Result<Value, HostError> {
        let mut current = item.clone();
        for name in path {
            if current.is_void() {
                return Ok(Value::Void);
            }
            let class = class_of(&current)
                .ok_or_else(|| HostError::new("TypeError", format!("{current} has no fields")))?
                .to_string();
            current = self.read_property(&current, &class, name)?;
        }
        Ok(current)
    }

    fn builtin(
        &mut self,
        step: &TypedStep,
        builtin: Builtin,
        receiver: Value,
        args: &[TypedArg],
    ) -> Result<Value, EvalError> {
        let items = match receiver {
            Value::Array(items) => items,
            other => return Err(failed(step, "TypeError", format!("{other} is not a list"))),
        };
        if builtin == Builtin::Count {
            return Ok(Value::Int(items.len() as i64));
        }
        let values = self.arg_values(args)?;
        let path = match values.first() {
            Some(Value::FieldPath(p)) => p.clone(),
            _ => return Err(failed(step, "ArgumentError", "missing field path")),
        };
        let keys = items
            .iter()
            .map(|item| self.field_value(item, &path))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| host_failed(step, e))?;
        let result = match builtin {
            Builtin::Matching => Value::Array(builtins::matching(items, &keys, &values[1])),
            Builtin::Between => {
                Value::Array(builtins::between(items, &keys, &values[1], &values[2]))
            }
            Builtin::Sort => {
                let ascending = !matches!(values[1], Value::Bool(false));
                Value::Array(builtins::sort(items, &keys, ascending))
            }
            Builtin::Sum => builtins::sum(&keys, &step.ty, step.span)?,
            Builtin::Average => builtins::average(&keys, step.span)?,
            Builtin::Count => unreachable!(),
        };
        Ok(result)
    }
}
