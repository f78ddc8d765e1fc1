//! Constant folding of literal arithmetic in program expressions.

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

use crate::ast::*;
use crate::MAX_INT;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{loc}: constant expression `{text}` leaves the uint range")]
pub struct ConstantOverflow {
    pub loc: SourceLoc,
    pub text: String,
}

pub fn fold_constants(c: &Contract) -> Result<Contract, ConstantOverflow> {
    let mut out = c.clone();
    if let Some(ctor) = &mut out.ctor {
        fold_block(&mut ctor.body)?;
    }
    for f in &mut out.functions {
        fold_block(&mut f.body)?;
        fold_expr(&mut f.ret_expr)?;
    }
    Ok(out)
}

fn fold_block(b: &mut Block) -> Result<(), ConstantOverflow> {
    for s in b {
        match &mut s.kind {
            StmtKind::Let { init, .. } => fold_expr(init)?,
            StmtKind::Skip | StmtKind::Fetch(_) => {}
            StmtKind::Assert(e) | StmtKind::Assume(e) => fold_expr(e)?,
            StmtKind::If { cond, then_branch, else_branch, .. } => {
                fold_expr(cond)?;
                fold_block(then_branch)?;
                fold_block(else_branch)?;
            }
            StmtKind::While { cond, body, .. } => {
                fold_expr(cond)?;
                fold_block(body)?;
            }
            StmtKind::Commit(ps) => {
                for (e, _) in ps {
                    fold_expr(e)?;
                }
            }
            StmtKind::Call { args, .. } => {
                for a in args {
                    fold_expr(a)?;
                }
            }
        }
    }
    Ok(())
}

pub fn fold_expr(e: &mut Expr) -> Result<(), ConstantOverflow> {
    match &mut e.kind {
        ExprKind::Bin(_, a, b) | ExprKind::Index(a, b) | ExprKind::FieldUpdate(a, _, b) => {
            fold_expr(a)?;
            fold_expr(b)?;
        }
        ExprKind::Not(a) | ExprKind::FieldIndex(a, _) => fold_expr(a)?,
        ExprKind::Update(a, b, c) => {
            fold_expr(a)?;
            fold_expr(b)?;
            fold_expr(c)?;
        }
        ExprKind::MapConst(_, es) => {
            for (_, v) in es {
                fold_expr(v)?;
            }
        }
        ExprKind::StructConst(_, fs) => {
            for (_, v) in fs {
                fold_expr(v)?;
            }
        }
        _ => {}
    }
    if let ExprKind::Bin(op, a, b) = &e.kind {
        if let (ExprKind::Nat(x), ExprKind::Nat(y)) = (&a.kind, &b.kind) {
            if op.is_arith() {
                let value: Option<BigUint> = match op {
                    BinOp::Add => Some(x + y),
                    BinOp::Mul => Some(x * y),
                    BinOp::Sub => (x >= y).then(|| x - y),
                    BinOp::Div => (!y.is_zero()).then(|| x / y),
                    _ => unreachable!(),
                };
                match value {
                    Some(v) if v <= *MAX_INT => e.kind = ExprKind::Nat(v),
                    _ => return Err(ConstantOverflow { loc: e.loc, text: crate::printer::print_expr(e) }),
                }
            }
        }
    }
    Ok(())
}
