//! Permutations of `{0, …, d-1}` in one-line notation.
//!
//! `p` stands for the ordering `x[p[0]] < x[p[1]] < … < x[p[d-1]]`. Labels
//! are printed 1-based (`[0, 2, 1]` is `"132"`).

/// All permutations in lexicographic order; the position of a permutation in
/// this list is its [`rank`].
pub fn all(d: usize) -> Vec<Vec<usize>> {
    (0..factorial(d)).map(|r| unrank(d, r)).collect()
}

pub fn factorial(d: usize) -> usize {
    (1..=d).product()
}

pub fn rank(p: &[usize]) -> usize {
    let d = p.len();
    let mut r = 0;
    for i in 0..d {
        let smaller = p[i + 1..].iter().filter(|&&v| v < p[i]).count();
        r += smaller * factorial(d - 1 - i);
    }
    r
}

pub fn unrank(d: usize, mut r: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..d).collect();
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let f = factorial(d - 1 - i);
        out.push(pool.remove(r / f));
        r %= f;
    }
    out
}

pub fn label(p: &[usize]) -> String {
    p.iter()
        .map(|&i| {
            if i < 9 {
                char::from(b'1' + i as u8).to_string()
            } else {
                format!("({})", i + 1)
            }
        })
        .collect()
}

pub fn parse_label(text: &str, d: usize) -> Option<Vec<usize>> {
    if text.len() != d {
        return None;
    }
    let p: Vec<usize> = text
        .bytes()
        .map(|b| (b as usize).checked_sub(b'1' as usize))
        .collect::<Option<_>>()?;
    let mut seen = vec![false; d];
    for &i in &p {
        if i >= d || seen[i] {
            return None;
        }
        seen[i] = true;
    }
    Some(p)
}

/// The ordering permutation of `x`, or `None` when two entries tie.
pub fn argsort<T: PartialOrd>(x: &[T]) -> Option<Vec<usize>> {
    let mut p: Vec<usize> = (0..x.len()).collect();
    p.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap_or(std::cmp::Ordering::Equal));
    for w in p.windows(2) {
        if x[w[0]].partial_cmp(&x[w[1]]) != Some(std::cmp::Ordering::Less) {
            return None;
        }
    }
    Some(p)
}
