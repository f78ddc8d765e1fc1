//! Type-directed synthesis of aggregate templates (`sum`, `fld`, `flatten`,
//! field access) and the template families used by the map typing rules.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use thiserror::Error;

use crate::ast::{BaseType, Ident, StructTable, Term};

pub type AccessPath = Vec<Ident>;

pub fn path_string(w: &AccessPath) -> String {
    if w.is_empty() {
        "ε".to_string()
    } else {
        w.join(".")
    }
}

/// A term with exactly one `Term::Hole`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Template {
    pub hole_sort: BaseType,
    pub result_sort: BaseType,
    pub term: Term,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("template hole expects {expected}, filler has sort {found}")]
pub struct SortMismatch {
    pub expected: BaseType,
    pub found: BaseType,
}

impl Template {
    pub fn hole(sort: BaseType) -> Template {
        Template { hole_sort: sort.clone(), result_sort: sort, term: Term::Hole }
    }

    pub fn apply(&self, filler: &Term, filler_sort: &BaseType) -> Result<Term, SortMismatch> {
        if *filler_sort != self.hole_sort {
            return Err(SortMismatch { expected: self.hole_sort.clone(), found: filler_sort.clone() });
        }
        Ok(self.fill(filler))
    }

    /// Substitutes the hole without checking the filler's sort.
    pub fn fill(&self, filler: &Term) -> Term {
        self.term.subst_hole(filler)
    }

    pub fn is_identity(&self) -> bool {
        self.term == Term::Hole
    }

    /// True when the template goes through `fld` or `flatten`.
    pub fn is_nested(&self) -> bool {
        self.term.any(&|t| matches!(t, Term::Fld(..) | Term::Flatten(_)))
    }

    pub fn has_sum(&self) -> bool {
        self.term.any(&|t| matches!(t, Term::Sum(_)))
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.term)
    }
}

/// One member (H1 over `map(T)`, H2 over `T`, shared access path) of a family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyMember {
    pub h1: Template,
    pub h2: Template,
    pub path: AccessPath,
}

pub type TemplateFamily = Vec<FamilyMember>;

/// All templates derivable for `hole_sort` that produce `target`, in canonical
/// order (access path, then node count, then printed form).
pub fn synthesize(hole_sort: &BaseType, target: &BaseType, structs: &StructTable) -> Vec<(Template, AccessPath)> {
    let mut out = Vec::new();
    let mut work = vec![(Term::Hole, hole_sort.clone(), AccessPath::new())];
    while let Some((term, sort, path)) = work.pop() {
        if sort == *target {
            out.push((
                Template { hole_sort: hole_sort.clone(), result_sort: target.clone(), term: term.clone() },
                path.clone(),
            ));
        }
        match &sort {
            BaseType::Map(inner) => match inner.as_ref() {
                BaseType::UInt => work.push((Term::sum(term), BaseType::UInt, path)),
                BaseType::Map(t) => {
                    work.push((Term::Flatten(Box::new(term)), BaseType::Map(t.clone()), path))
                }
                BaseType::Struct(s) => {
                    for (x, tx) in structs.fields(s).unwrap_or(&[]) {
                        let mut p = path.clone();
                        p.push(x.clone());
                        work.push((Term::Fld(x.clone(), Box::new(term.clone())), BaseType::map(tx.clone()), p));
                    }
                }
                _ => {}
            },
            BaseType::Struct(s) => {
                for (x, tx) in structs.fields(s).unwrap_or(&[]) {
                    let mut p = path.clone();
                    p.push(x.clone());
                    work.push((Term::field(term.clone(), x), tx.clone(), p));
                }
            }
            _ => {}
        }
    }
    canonical_sort(&mut out);
    out
}

pub fn canonical_sort(v: &mut [(Template, AccessPath)]) {
    v.sort_by(|(a, pa), (b, pb)| {
        pa.cmp(pb)
            .then(a.term.size().cmp(&b.term.size()))
            .then_with(|| a.term.to_string().cmp(&b.term.to_string()))
    });
}

pub fn template_family(value_sort: &BaseType, structs: &StructTable) -> TemplateFamily {
    let h1s = synthesize(&BaseType::map(value_sort.clone()), &BaseType::UInt, structs);
    let h2s = synthesize(value_sort, &BaseType::UInt, structs);
    let mut out = Vec::new();
    for (h1, w1) in &h1s {
        for (h2, w2) in &h2s {
            if w1 == w2 {
                out.push(FamilyMember { h1: h1.clone(), h2: h2.clone(), path: w1.clone() });
            }
        }
    }
    out
}

/// Per-contract template queries, memoized by sort. With `nested` off, only
/// `map(uint)` values get a family and aggregate templates never go through
/// `fld`/`flatten`.
pub struct Templates {
    structs: StructTable,
    nested: bool,
    families: Mutex<HashMap<BaseType, TemplateFamily>>,
    uint_templates: Mutex<HashMap<BaseType, Vec<(Template, AccessPath)>>>,
}

impl Templates {
    pub fn new(structs: StructTable, nested: bool) -> Templates {
        Templates {
            structs,
            nested,
            families: Mutex::new(HashMap::new()),
            uint_templates: Mutex::new(HashMap::new()),
        }
    }

    pub fn structs(&self) -> &StructTable {
        &self.structs
    }

    pub fn family(&self, value_sort: &BaseType) -> TemplateFamily {
        let mut cache = self.families.lock().expect("template cache");
        cache
            .entry(value_sort.clone())
            .or_insert_with(|| {
                if !self.nested && *value_sort != BaseType::UInt {
                    Vec::new()
                } else {
                    template_family(value_sort, &self.structs)
                }
            })
            .clone()
    }

    /// UInt-valued templates over `sort` (scalar leaves and aggregates).
    pub fn uint_templates(&self, sort: &BaseType) -> Vec<(Template, AccessPath)> {
        let mut cache = self.uint_templates.lock().expect("template cache");
        cache
            .entry(sort.clone())
            .or_insert_with(|| {
                let mut v = synthesize(sort, &BaseType::UInt, &self.structs);
                if !self.nested {
                    v.retain(|(t, _)| !t.is_nested());
                }
                v
            })
            .clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_term;

    fn user() -> StructTable {
        StructTable::from_fields([(
            "User".to_string(),
            vec![("bal".to_string(), BaseType::UInt), ("frozen".to_string(), BaseType::UInt)],
        )])
    }

    fn t(s: &str) -> Term {
        parse_term(&s.replace('□', "HOLE")).unwrap().replace(&mut |t| match t {
            Term::Var(x) if x == "HOLE" => Some(Term::Hole),
            _ => None,
        })
    }

    #[test]
    fn uint_hole_is_identity_only() {
        let r = synthesize(&BaseType::UInt, &BaseType::UInt, &StructTable::default());
        assert_eq!(r, vec![(Template::hole(BaseType::UInt), vec![])]);
    }

    #[test]
    fn map_of_user() {
        let hs = BaseType::map(BaseType::Struct("User".into()));
        let r = synthesize(&hs, &BaseType::UInt, &user());
        let got: Vec<(Term, AccessPath)> = r.into_iter().map(|(h, w)| (h.term, w)).collect();
        assert_eq!(
            got,
            vec![
                (t("sum(fld(bal, □))"), vec!["bal".to_string()]),
                (t("sum(fld(frozen, □))"), vec!["frozen".to_string()]),
            ]
        );
    }

    #[test]
    fn nested_map_of_user() {
        let hs = BaseType::map(BaseType::map(BaseType::Struct("User".into())));
        let r = synthesize(&hs, &BaseType::UInt, &user());
        assert!(r.iter().any(|(h, w)| h.term == t("sum(fld(bal, flatten(□)))") && w == &vec!["bal".to_string()]));
    }

    #[test]
    fn families() {
        let f = template_family(&BaseType::UInt, &StructTable::default());
        assert_eq!(f, vec![FamilyMember { h1: Template {
            hole_sort: BaseType::map(BaseType::UInt),
            result_sort: BaseType::UInt,
            term: Term::sum(Term::Hole),
        }, h2: Template::hole(BaseType::UInt), path: vec![] }]);
        let f = template_family(&BaseType::Struct("User".into()), &user());
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].h2.term, t("□[.bal]"));
        assert_eq!(f[1].path, vec!["frozen".to_string()]);
        assert!(template_family(&BaseType::Bool, &StructTable::default()).is_empty());
    }

    #[test]
    fn apply_checks_the_hole_sort() {
        let (h, _) = synthesize(
            &BaseType::map(BaseType::map(BaseType::Struct("User".into()))),
            &BaseType::UInt,
            &user(),
        )
        .into_iter()
        .find(|(_, w)| w == &vec!["bal".to_string()])
        .unwrap();
        let usrs = Term::var("usrs");
        assert_eq!(
            h.apply(&usrs, &h.hole_sort.clone()).unwrap(),
            t("sum(fld(bal, flatten(usrs)))")
        );
        let id = Template::hole(BaseType::UInt);
        assert_eq!(id.apply(&Term::var("x"), &BaseType::UInt).unwrap(), Term::var("x"));
        let sum = Template {
            hole_sort: BaseType::map(BaseType::UInt),
            result_sort: BaseType::UInt,
            term: Term::sum(Term::Hole),
        };
        assert!(sum.apply(&Term::var("m"), &BaseType::map(BaseType::Bool)).is_err());
    }

    #[test]
    fn no_nested_restricts() {
        let ts = Templates::new(user(), false);
        assert!(ts.family(&BaseType::Struct("User".into())).is_empty());
        assert_eq!(ts.family(&BaseType::UInt).len(), 1);
        let nested = BaseType::map(BaseType::map(BaseType::UInt));
        assert!(ts.uint_templates(&nested).is_empty());
    }
}
