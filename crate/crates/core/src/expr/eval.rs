use super::ast::{BinaryOp, Expr, UnaryOp};
use crate::error::{Error, Result};

/// A value with one directional derivative per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub tangents: Vec<f64>,
}

fn domain(node: &Expr, message: &str) -> Error {
    Error::Domain {
        node: node.to_string(),
        message: message.to_string(),
    }
}

fn check_dim(e: &Expr, theta: &[f64]) -> Result<()> {
    let need = e.min_dim();
    if need > theta.len() {
        return Err(Error::invalid(format!(
            "expression uses x{need} but only {} parameter(s) were given",
            theta.len()
        )));
    }
    Ok(())
}

fn finite(node: &Expr, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(node, "non-finite result"))
    }
}

fn pow_value(node: &Expr, a: f64, b: f64) -> Result<f64> {
    if a < 0.0 && b.fract() != 0.0 {
        return Err(domain(node, "negative base with non-integer exponent"));
    }
    if a == 0.0 && b < 0.0 {
        return Err(domain(node, "zero base with negative exponent"));
    }
    finite(node, a.powf(b))
}

fn eval_node(e: &Expr, theta: &[f64]) -> Result<f64> {
    match e {
        Expr::Const(v) => Ok(*v),
        Expr::Var(i) => Ok(theta[*i]),
        Expr::Unary(op, a) => {
            let x = eval_node(a, theta)?;
            let v = match op {
                UnaryOp::Neg => -x,
                UnaryOp::Log => {
                    if x <= 0.0 {
                        return Err(domain(e, "log of a nonpositive value"));
                    }
                    x.ln()
                }
                UnaryOp::Exp => x.exp(),
                UnaryOp::Tanh => x.tanh(),
                UnaryOp::Abs => x.abs(),
                UnaryOp::Sqrt => {
                    if x < 0.0 {
                        return Err(domain(e, "sqrt of a negative value"));
                    }
                    x.sqrt()
                }
            };
            finite(e, v)
        }
        Expr::Binary(op, a, b) => {
            let x = eval_node(a, theta)?;
            let y = eval_node(b, theta)?;
            let v = match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => {
                    if y == 0.0 {
                        return Err(domain(e, "division by zero"));
                    }
                    x / y
                }
                BinaryOp::Pow => return pow_value(e, x, y),
                // ties go to the first argument
                BinaryOp::Max => {
                    if y > x {
                        y
                    } else {
                        x
                    }
                }
                BinaryOp::Min => {
                    if y < x {
                        y
                    } else {
                        x
                    }
                }
            };
            finite(e, v)
        }
    }
}

/// Evaluates `e` at `theta`.
pub fn eval(e: &Expr, theta: &[f64]) -> Result<f64> {
    check_dim(e, theta)?;
    eval_node(e, theta)
}

fn scale(t: &mut [f64], s: f64) {
    t.iter_mut().for_each(|x| *x *= s);
}

fn dual_node(e: &Expr, theta: &[f64]) -> Result<DualValue> {
    let m = theta.len();
    match e {
        Expr::Const(v) => Ok(DualValue {
            value: *v,
            tangents: vec![0.0; m],
        }),
        Expr::Var(i) => {
            let mut tangents = vec![0.0; m];
            tangents[*i] = 1.0;
            Ok(DualValue {
                value: theta[*i],
                tangents,
            })
        }
        Expr::Unary(op, a) => {
            let DualValue { value: x, mut tangents } = dual_node(a, theta)?;
            let (v, dv) = match op {
                UnaryOp::Neg => (-x, -1.0),
                UnaryOp::Log => {
                    if x <= 0.0 {
                        return Err(domain(e, "log of a nonpositive value"));
                    }
                    (x.ln(), 1.0 / x)
                }
                UnaryOp::Exp => {
                    let v = x.exp();
                    (v, v)
                }
                UnaryOp::Tanh => {
                    let v = x.tanh();
                    (v, 1.0 - v * v)
                }
                // sign(0) = 0
                UnaryOp::Abs => (
                    x.abs(),
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    },
                ),
                UnaryOp::Sqrt => {
                    if x < 0.0 {
                        return Err(domain(e, "sqrt of a negative value"));
                    }
                    let v = x.sqrt();
                    if v == 0.0 && tangents.iter().any(|t| *t != 0.0) {
                        return Err(domain(e, "sqrt is not differentiable at 0"));
                    }
                    (v, if v == 0.0 { 0.0 } else { 0.5 / v })
                }
            };
            finite(e, v)?;
            scale(&mut tangents, dv);
            Ok(DualValue { value: v, tangents })
        }
        Expr::Binary(op, a, b) => {
            let da = dual_node(a, theta)?;
            let db = dual_node(b, theta)?;
            let (x, y) = (da.value, db.value);
            let combine = |ca: f64, cb: f64| -> Vec<f64> {
                da.tangents
                    .iter()
                    .zip(&db.tangents)
                    .map(|(ta, tb)| ca * ta + cb * tb)
                    .collect()
            };
            let out = match op {
                BinaryOp::Add => DualValue {
                    value: x + y,
                    tangents: combine(1.0, 1.0),
                },
                BinaryOp::Sub => DualValue {
                    value: x - y,
                    tangents: combine(1.0, -1.0),
                },
                BinaryOp::Mul => DualValue {
                    value: x * y,
                    tangents: combine(y, x),
                },
                BinaryOp::Div => {
                    if y == 0.0 {
                        return Err(domain(e, "division by zero"));
                    }
                    DualValue {
                        value: x / y,
                        tangents: combine(1.0 / y, -x / (y * y)),
                    }
                }
                BinaryOp::Pow => {
                    let v = pow_value(e, x, y)?;
                    let exponent_varies = db.tangents.iter().any(|t| *t != 0.0);
                    let base_varies = da.tangents.iter().any(|t| *t != 0.0);
                    let dbase = if base_varies {
                        if x == 0.0 && y < 1.0 && y != 0.0 {
                            return Err(domain(e, "power is not differentiable at a zero base"));
                        }
                        if y == 0.0 {
                            0.0
                        } else {
                            y * x.powf(y - 1.0)
                        }
                    } else {
                        0.0
                    };
                    let dexp = if exponent_varies {
                        if x <= 0.0 {
                            return Err(domain(e, "variable exponent needs a positive base"));
                        }
                        v * x.ln()
                    } else {
                        0.0
                    };
                    DualValue {
                        value: v,
                        tangents: combine(dbase, dexp),
                    }
                }
                BinaryOp::Max => {
                    if y > x {
                        db
                    } else {
                        da
                    }
                }
                BinaryOp::Min => {
                    if y < x {
                        db
                    } else {
                        da
                    }
                }
            };
            finite(e, out.value)?;
            if out.tangents.iter().any(|t| !t.is_finite()) {
                return Err(domain(e, "non-finite derivative"));
            }
            Ok(out)
        }
    }
}

/// Value and gradient in one forward pass.
pub fn eval_dual(e: &Expr, theta: &[f64]) -> Result<DualValue> {
    check_dim(e, theta)?;
    dual_node(e, theta)
}

/// Gradient by forward-mode differentiation.
pub fn grad(e: &Expr, theta: &[f64]) -> Result<Vec<f64>> {
    Ok(eval_dual(e, theta)?.tangents)
}
