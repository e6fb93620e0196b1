//! Porter suffix-stripping stemmer.
//!
//! Implements the 1980 algorithm with one widely-adopted amendment to step
//! 1c: `y` becomes `i` only when preceded by a consonant and the remaining
//! stem is longer than one letter. The original `(*v*) Y -> I` rule turns
//! `play` into `plai` and `subway` into `subwai`, which defeats the whole
//! point of conflating `playing`/`play`; the amended rule keeps those words
//! stable while still mapping `happy`/`happiness` together.

/// `true` when `w[i]` acts as a consonant under Porter's definition:
/// everything except a/e/i/o/u, and except `y` preceded by a consonant.
fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// Porter's measure m: the number of vowel→consonant transitions, i.e. the
/// m in the form [C](VC)^m[V].
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let cons = is_consonant(w, i);
        if prev_vowel && cons {
            m += 1;
        }
        prev_vowel = !cons;
    }
    m
}

fn contains_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| !is_consonant(w, i))
}

/// *d: ends with a doubled consonant (hopp, fizz).
fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

/// *o: ends consonant-vowel-consonant where the final consonant is not
/// w, x or y (fil, hop — but not fail, box, play).
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn step1a(w: &mut Vec<u8>) {
    if w.ends_with(b"sses") || w.ends_with(b"ies") {
        w.truncate(w.len() - 2);
    } else if !w.ends_with(b"ss") && w.ends_with(b"s") {
        w.truncate(w.len() - 1);
    }
}

fn step1b(w: &mut Vec<u8>) {
    // Longest matching suffix decides the rule: eed beats ed.
    if w.ends_with(b"eed") {
        if measure(&w[..w.len() - 3]) > 0 {
            w.truncate(w.len() - 1);
        }
        return;
    }
    let stripped = if w.ends_with(b"ed") && contains_vowel(&w[..w.len() - 2]) {
        w.truncate(w.len() - 2);
        true
    } else if w.ends_with(b"ing") && contains_vowel(&w[..w.len() - 3]) {
        w.truncate(w.len() - 3);
        true
    } else {
        false
    };
    if stripped {
        if w.ends_with(b"at") || w.ends_with(b"bl") || w.ends_with(b"iz") {
            w.push(b'e');
        } else if ends_double_consonant(w) && !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
            w.truncate(w.len() - 1);
        } else if measure(w) == 1 && ends_cvc(w) {
            w.push(b'e');
        }
    }
}

fn step1c(w: &mut [u8]) {
    let n = w.len();
    if n >= 2 && w[n - 1] == b'y' {
        let stem_len = n - 1;
        if stem_len > 1 && is_consonant(w, stem_len - 1) {
            w[stem_len] = b'i';
        }
    }
}

/// One suffix-rewrite table entry: suffix, replacement.
type Rule = (&'static [u8], &'static [u8]);

/// Applies the longest-matching rule of `rules` when `measure(stem)` exceeds
/// `min_measure`. Porter's tables try only the longest matching suffix: if
/// its condition fails, no shorter suffix is attempted.
fn apply_rules(w: &mut Vec<u8>, rules: &[Rule], min_measure: usize) {
    let mut best: Option<&Rule> = None;
    for rule in rules {
        if w.ends_with(rule.0) && best.map_or(true, |b| rule.0.len() > b.0.len()) {
            best = Some(rule);
        }
    }
    if let Some((suffix, replacement)) = best {
        let stem_len = w.len() - suffix.len();
        if measure(&w[..stem_len]) > min_measure {
            w.truncate(stem_len);
            w.extend_from_slice(replacement);
        }
    }
}

const STEP2_RULES: &[Rule] = &[
    (b"ational", b"ate"),
    (b"ization", b"ize"),
    (b"iveness", b"ive"),
    (b"fulness", b"ful"),
    (b"ousness", b"ous"),
    (b"tional", b"tion"),
    (b"biliti", b"ble"),
    (b"entli", b"ent"),
    (b"ousli", b"ous"),
    (b"ation", b"ate"),
    (b"alism", b"al"),
    (b"aliti", b"al"),
    (b"iviti", b"ive"),
    (b"enci", b"ence"),
    (b"anci", b"ance"),
    (b"izer", b"ize"),
    (b"abli", b"able"),
    (b"alli", b"al"),
    (b"ator", b"ate"),
    (b"eli", b"e"),
];

const STEP3_RULES: &[Rule] = &[
    (b"icate", b"ic"),
    (b"ative", b""),
    (b"alize", b"al"),
    (b"iciti", b"ic"),
    (b"ical", b"ic"),
    (b"ness", b""),
    (b"ful", b""),
];

fn step4(w: &mut Vec<u8>) {
    const RULES: &[&[u8]] = &[
        b"ement", b"ance", b"ence", b"able", b"ible", b"ment", b"ant", b"ent", b"ion", b"ism",
        b"ate", b"iti", b"ous", b"ive", b"ize", b"al", b"er", b"ic", b"ou",
    ];
    let mut best: Option<&[u8]> = None;
    for suffix in RULES {
        if w.ends_with(suffix) && best.map_or(true, |b| suffix.len() > b.len()) {
            best = Some(suffix);
        }
    }
    if let Some(suffix) = best {
        let stem_len = w.len() - suffix.len();
        let extra_ok = suffix != b"ion"
            || (stem_len > 0 && matches!(w[stem_len - 1], b's' | b't'));
        if extra_ok && measure(&w[..stem_len]) > 1 {
            w.truncate(stem_len);
        }
    }
}

fn step5a(w: &mut Vec<u8>) {
    if w.ends_with(b"e") {
        let stem = &w[..w.len() - 1];
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            w.truncate(w.len() - 1);
        }
    }
}

fn step5b(w: &mut Vec<u8>) {
    if measure(w) > 1 && ends_double_consonant(w) && w[w.len() - 1] == b'l' {
        w.truncate(w.len() - 1);
    }
}

/// Stems a single lowercase token.
///
/// Only all-ASCII-alphabetic tokens are stemmed; anything containing digits
/// or non-ASCII letters passes through unchanged, as do words of one or two
/// letters.
pub fn porter_stem(token: &str) -> String {
    if token.len() <= 2 || !token.bytes().all(|b| b.is_ascii_alphabetic()) {
        return token.to_string();
    }
    let mut w: Vec<u8> = token.bytes().map(|b| b.to_ascii_lowercase()).collect();
    step1a(&mut w);
    step1b(&mut w);
    step1c(&mut w);
    apply_rules(&mut w, STEP2_RULES, 0);
    apply_rules(&mut w, STEP3_RULES, 0);
    step4(&mut w);
    step5a(&mut w);
    step5b(&mut w);
    String::from_utf8(w).expect("ascii input stays ascii")
}
