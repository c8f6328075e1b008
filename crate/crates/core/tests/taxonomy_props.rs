use num_traits::{One, Zero};
use proptest::prelude::*;

use regwatch::notify::{semantic_score, wup_similarity, Taxonomy};
use regwatch::ratio::{ratio, Rational};

/// A random tree: term i > 0 hangs off a term with a smaller index.
fn tree() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=100).prop_flat_map(|n| {
        prop::collection::vec(any::<usize>(), n)
            .prop_map(|seeds| seeds.iter().enumerate().map(|(i, s)| if i == 0 { 0 } else { s % i }).collect())
    })
}

fn name(i: usize) -> String {
    format!("t{i}")
}

fn taxonomy_text(parents: &[usize], rotate: usize) -> String {
    let mut lines: Vec<String> = parents.iter().enumerate().map(|(i, p)| format!("{}\t{}", name(i), name(*p))).collect();
    let k = rotate % lines.len();
    lines.rotate_left(k);
    lines.join("\n")
}

/// Full root-to-term path.
fn path(parents: &[usize], mut t: usize) -> Vec<usize> {
    let mut p = vec![t];
    while t != 0 {
        t = parents[t];
        p.push(t);
    }
    p.reverse();
    p
}

fn wup_oracle(parents: &[usize], a: usize, b: usize) -> Rational {
    let (pa, pb) = (path(parents, a), path(parents, b));
    let common = pa.iter().zip(&pb).take_while(|(x, y)| x == y).count();
    ratio(2 * common as u64, (pa.len() + pb.len()) as u64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn wup_matches_ancestor_paths(parents in tree(), rotate in any::<usize>(), picks in prop::collection::vec(any::<(usize, usize)>(), 1..20)) {
        let tax = Taxonomy::parse(&taxonomy_text(&parents, rotate)).unwrap();
        prop_assert_eq!(tax.root(), "t0");
        let n = parents.len();
        for (x, y) in picks {
            let (a, b) = (x % n, y % n);
            let w = wup_similarity(&tax, &name(a), &name(b)).unwrap();
            prop_assert_eq!(&w, &wup_oracle(&parents, a, b));
            prop_assert_eq!(&w, &wup_similarity(&tax, &name(b), &name(a)).unwrap());
            prop_assert!(w > Rational::zero() && w <= Rational::one());
            prop_assert_eq!(w == Rational::one(), a == b);
        }
    }

    #[test]
    fn semantic_score_is_mean_of_max(parents in tree(), role in prop::collection::vec(any::<usize>(), 1..5), meta in prop::collection::vec(any::<usize>(), 1..5)) {
        let tax = Taxonomy::parse(&taxonomy_text(&parents, 0)).unwrap();
        let n = parents.len();
        let role: Vec<usize> = role.iter().map(|r| r % n).collect();
        let meta: Vec<usize> = meta.iter().map(|m| m % n).collect();
        let mut total = Rational::zero();
        for r in &role {
            total += meta.iter().map(|m| wup_oracle(&parents, *r, *m)).max().unwrap();
        }
        let expected = total / Rational::from_integer((role.len() as u64).into());
        let names = |v: &[usize]| v.iter().map(|i| name(*i)).collect::<Vec<_>>();
        let mut meta_names = names(&meta);
        meta_names.push("not-a-term".into());
        let got = semantic_score(&names(&role), &meta_names, &tax);
        prop_assert_eq!(got.score, expected);
        prop_assert_eq!(got.excluded, 1);
    }
}
