use std::collections::HashMap;

use super::{apply_binary, apply_pow, apply_unary, BinaryOp, Expr, ExprError, Node, UnaryOp};

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
    Pow(usize, i32),
}

const OK: u32 = u32::MAX;

/// Flattened evaluation tape for one or more expressions sharing a variable
/// ordering. Shared subexpressions are evaluated once.
#[derive(Debug, Clone)]
pub struct Compiled {
    ops: Vec<Op>,
    nodes: Vec<Expr>,
    roots: Vec<usize>,
    nvars: usize,
}

/// Reusable evaluation buffers.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    vals: Vec<f64>,
    origin: Vec<u32>,
}

impl Compiled {
    pub fn new(exprs: &[Expr], vars: &[String]) -> Result<Compiled, ExprError> {
        let mut c = Compiled {
            ops: Vec::new(),
            nodes: Vec::new(),
            roots: Vec::with_capacity(exprs.len()),
            nvars: vars.len(),
        };
        let index: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut slot_of: HashMap<*const Node, usize> = HashMap::new();
        for e in exprs {
            let r = c.emit(e, &index, &mut slot_of)?;
            c.roots.push(r);
        }
        Ok(c)
    }

    fn emit(
        &mut self,
        root: &Expr,
        index: &HashMap<&str, usize>,
        slot_of: &mut HashMap<*const Node, usize>,
    ) -> Result<usize, ExprError> {
        // iterative post-order so deep trees do not overflow the stack
        let mut stack: Vec<(Expr, bool)> = vec![(root.clone(), false)];
        while let Some((e, expanded)) = stack.pop() {
            if slot_of.contains_key(&e.id()) {
                continue;
            }
            if !expanded {
                stack.push((e.clone(), true));
                match e.node() {
                    Node::Const(_) | Node::Var(_) => {}
                    Node::Unary(_, a) | Node::Pow(a, _) => stack.push((a.clone(), false)),
                    Node::Binary(_, a, b) => {
                        stack.push((b.clone(), false));
                        stack.push((a.clone(), false));
                    }
                }
                continue;
            }
            let op = match e.node() {
                Node::Const(k) => Op::Const(k.value()),
                Node::Var(v) => Op::Var(*index.get(v.as_str()).ok_or_else(|| ExprError::UnknownVariable(v.clone()))?),
                Node::Unary(o, a) => Op::Unary(*o, slot_of[&a.id()]),
                Node::Binary(o, a, b) => Op::Binary(*o, slot_of[&a.id()], slot_of[&b.id()]),
                Node::Pow(a, n) => Op::Pow(slot_of[&a.id()], *n),
            };
            slot_of.insert(e.id(), self.ops.len());
            self.ops.push(op);
            self.nodes.push(e);
        }
        Ok(slot_of[&root.id()])
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    fn run(&self, x: &[f64], s: &mut Scratch) {
        assert_eq!(x.len(), self.nvars, "point dimension mismatch");
        let n = self.ops.len();
        s.vals.clear();
        s.vals.resize(n, 0.0);
        s.origin.clear();
        s.origin.resize(n, OK);
        for i in 0..n {
            let (v, o) = match self.ops[i] {
                Op::Const(k) => (k, OK),
                Op::Var(j) => (x[j], OK),
                Op::Unary(op, a) => {
                    if s.origin[a] != OK {
                        (f64::NAN, s.origin[a])
                    } else {
                        match apply_unary(op, s.vals[a], &self.nodes[i]) {
                            Ok(v) => (v, OK),
                            Err(_) => (f64::NAN, i as u32),
                        }
                    }
                }
                Op::Binary(op, a, b) => {
                    if s.origin[a] != OK {
                        (f64::NAN, s.origin[a])
                    } else if s.origin[b] != OK {
                        (f64::NAN, s.origin[b])
                    } else {
                        match apply_binary(op, s.vals[a], s.vals[b], &self.nodes[i]) {
                            Ok(v) => (v, OK),
                            Err(_) => (f64::NAN, i as u32),
                        }
                    }
                }
                Op::Pow(a, k) => {
                    if s.origin[a] != OK {
                        (f64::NAN, s.origin[a])
                    } else {
                        match apply_pow(s.vals[a], k, &self.nodes[i]) {
                            Ok(v) => (v, OK),
                            Err(_) => (f64::NAN, i as u32),
                        }
                    }
                }
            };
            s.vals[i] = v;
            s.origin[i] = o;
        }
    }

    fn error_at(&self, slot: u32) -> ExprError {
        let i = slot as usize;
        let e = &self.nodes[i];
        let reason = match self.ops[i] {
            Op::Unary(UnaryOp::Log, _) => "log of non-positive value",
            _ => "division by zero",
        };
        ExprError::Domain {
            subexpr: e.to_string(),
            reason,
        }
    }

    /// Evaluate every root into `out`; fails on the first root with a domain error.
    pub fn eval_into(&self, x: &[f64], s: &mut Scratch, out: &mut [f64]) -> Result<(), ExprError> {
        self.run(x, s);
        for (k, &r) in self.roots.iter().enumerate() {
            if s.origin[r] != OK {
                return Err(self.error_at(s.origin[r]));
            }
            out[k] = s.vals[r];
        }
        Ok(())
    }

    /// Evaluate every root, each with its own result.
    pub fn eval_all(&self, x: &[f64]) -> Vec<Result<f64, ExprError>> {
        let mut s = Scratch::default();
        self.run(x, &mut s);
        self.roots
            .iter()
            .map(|&r| {
                if s.origin[r] != OK {
                    Err(self.error_at(s.origin[r]))
                } else {
                    Ok(s.vals[r])
                }
            })
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        let mut out = vec![0.0; self.roots.len()];
        self.eval_into(x, &mut Scratch::default(), &mut out)?;
        Ok(out)
    }

    pub fn eval_one(&self, root: usize, x: &[f64]) -> Result<f64, ExprError> {
        let mut s = Scratch::default();
        self.run(x, &mut s);
        let r = self.roots[root];
        if s.origin[r] != OK {
            Err(self.error_at(s.origin[r]))
        } else {
            Ok(s.vals[r])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn matches_tree_evaluation() {
        let vars = vec!["x".to_string(), "y".to_string()];
        let es: Vec<Expr> = ["sin(x)*y^3 - exp(x/y)", "log(x*x+1)/(2+cos(y))", "7/3"]
            .iter()
            .map(|s| parse(s).unwrap())
            .collect();
        let c = Compiled::new(&es, &vars).unwrap();
        let pt = [0.3, -1.7];
        let got = c.eval(&pt).unwrap();
        for (e, g) in es.iter().zip(got) {
            assert_eq!(e.eval(&vars, &pt).unwrap(), g);
        }
    }

    #[test]
    fn errors_are_per_root() {
        let vars = vec!["x".to_string()];
        let es = [parse("1/x").unwrap(), parse("x+1").unwrap()];
        let c = Compiled::new(&es, &vars).unwrap();
        let r = c.eval_all(&[0.0]);
        assert!(matches!(&r[0], Err(ExprError::Domain { subexpr, .. }) if subexpr == "1/x"));
        assert_eq!(r[1].as_ref().unwrap(), &1.0);
    }

    #[test]
    fn unknown_variable_rejected() {
        let r = Compiled::new(&[parse("z").unwrap()], &["x".to_string()]);
        assert!(matches!(r, Err(ExprError::UnknownVariable(_))));
    }
}
