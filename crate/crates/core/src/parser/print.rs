use std::fmt::Write;

use super::{Formula, Item, MlnProgram};
use crate::logic::{Term, Weight};
use crate::scalar::Scalar;

fn item(out: &mut String, it: &Item) {
    match it {
        Item::Lit { positive, atom } => {
            if !positive {
                out.push('!');
            }
            write!(out, "{atom}").unwrap();
        }
        Item::Cmp(c) => write!(out, "{c}").unwrap(),
    }
}

fn items(out: &mut String, its: &[Item], sep: &str) {
    for (i, it) in its.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        item(out, it);
    }
}

fn name(s: &str) -> String {
    let plain =
        s.starts_with(|c: char| c.is_alphabetic() || c == '_') && s.chars().all(|c| c.is_alphanumeric() || c == '_') && s != "v";
    if plain {
        s.to_string()
    } else {
        Term::Const(s.to_string()).to_string()
    }
}

pub fn format_formula(f: &Formula) -> String {
    let mut out = String::new();
    match f {
        Formula::Implies { body, head } => {
            items(&mut out, body, ", ");
            out.push_str(" => ");
            items(&mut out, head, " v ");
        }
        Formula::Iff(a, b) => {
            item(&mut out, a);
            out.push_str(" <=> ");
            item(&mut out, b);
        }
        Formula::Or(its) => items(&mut out, its, " v "),
    }
    out
}

/// Canonical text of the program part (domains, schemas, rules).
pub fn print_program<T: Scalar>(p: &MlnProgram<T>) -> String {
    let mut out = String::new();
    for (dom, d) in p.domains.iter().filter(|(_, d)| d.declared) {
        let cs: Vec<String> = d.constants.iter().map(|c| Term::Const(c.clone()).to_string()).collect();
        writeln!(out, "{dom} = {{{}}}", cs.join(", ")).unwrap();
    }
    for s in &p.schemas {
        let star = if s.is_query() { "*" } else { "" };
        writeln!(out, "{star}{}({})", s.name, s.domains.join(", ")).unwrap();
    }
    let mut current = None;
    for r in &p.rules {
        if r.task != current {
            match &r.task {
                Some(t) => writeln!(out, "@task {} {}", name(&t.name), t.kind.annotation()).unwrap(),
                None => writeln!(out, "@auto").unwrap(),
            }
            current = r.task.clone();
        }
        let w = match r.weight {
            Weight::Hard => "inf".to_string(),
            Weight::Soft(w) => format!("{}", w.as_f64()),
        };
        writeln!(out, "{w}: {}", format_formula(&r.formula)).unwrap();
    }
    out
}

pub fn print_evidence<T: Scalar>(p: &MlnProgram<T>) -> String {
    let mut out = String::new();
    for e in &p.evidence {
        let bang = if e.truth { "" } else { "!" };
        let args: Vec<String> = e.args.iter().map(|a| Term::Const(a.clone()).to_string()).collect();
        writeln!(out, "{bang}{}({})", e.predicate, args.join(", ")).unwrap();
    }
    out
}
