//! Porter stemming, the classic 1980 definition: steps 1a through 5b,
//! applied once, longest matching suffix per step, no short-word guard.

/// Stems a lowercase ASCII token. Anything containing a character outside
/// `a-z` is returned unchanged.
pub fn stem(token: &str) -> String {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_lowercase()) {
        return token.to_string();
    }
    let mut w = token.as_bytes().to_vec();
    step_1a(&mut w);
    step_1b(&mut w);
    step_1c(&mut w);
    step_2(&mut w);
    step_3(&mut w);
    step_4(&mut w);
    step_5a(&mut w);
    step_5b(&mut w);
    String::from_utf8(w).expect("stemming preserves ASCII")
}

const VOWELS: &[u8] = b"aeiou";

/// `y` counts as a consonant at the start of a word or after a vowel, and
/// as a vowel after a consonant.
fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b if VOWELS.contains(&b) => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// The measure m of `w[..len]`: number of vowel-to-consonant transitions in
/// the form `[C](VC)^m[V]`.
fn measure(w: &[u8], len: usize) -> usize {
    let mut m = 0;
    let mut i = 0;
    while i < len && is_consonant(w, i) {
        i += 1;
    }
    while i < len {
        while i < len && !is_consonant(w, i) {
            i += 1;
        }
        if i == len {
            break;
        }
        m += 1;
        while i < len && is_consonant(w, i) {
            i += 1;
        }
    }
    m
}

fn contains_vowel(w: &[u8], len: usize) -> bool {
    (0..len).any(|i| !is_consonant(w, i))
}

/// *d: ends with a double consonant.
fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

/// *o on `w[..len]`: ends consonant-vowel-consonant where the final
/// consonant is not w, x, or y.
fn ends_cvc(w: &[u8], len: usize) -> bool {
    len >= 3
        && is_consonant(w, len - 3)
        && !is_consonant(w, len - 2)
        && is_consonant(w, len - 1)
        && !matches!(w[len - 1], b'w' | b'x' | b'y')
}

fn ends_with(w: &[u8], suffix: &[u8]) -> bool {
    w.len() >= suffix.len() && &w[w.len() - suffix.len()..] == suffix
}

/// Replaces `suffix` (which must be present) with `replacement`.
fn set_suffix(w: &mut Vec<u8>, suffix: &[u8], replacement: &[u8]) {
    let stem_len = w.len() - suffix.len();
    w.truncate(stem_len);
    w.extend_from_slice(replacement);
}

fn step_1a(w: &mut Vec<u8>) {
    if ends_with(w, b"sses") {
        w.truncate(w.len() - 2);
    } else if ends_with(w, b"ies") {
        w.truncate(w.len() - 2);
    } else if ends_with(w, b"ss") {
        // unchanged
    } else if ends_with(w, b"s") {
        w.truncate(w.len() - 1);
    }
}

fn step_1b(w: &mut Vec<u8>) {
    if ends_with(w, b"eed") {
        if measure(w, w.len() - 3) > 0 {
            w.truncate(w.len() - 1);
        }
        return;
    }
    let removed = if ends_with(w, b"ed") && contains_vowel(w, w.len() - 2) {
        w.truncate(w.len() - 2);
        true
    } else if ends_with(w, b"ing") && contains_vowel(w, w.len() - 3) {
        w.truncate(w.len() - 3);
        true
    } else {
        false
    };
    if !removed {
        return;
    }
    if ends_with(w, b"at") || ends_with(w, b"bl") || ends_with(w, b"iz") {
        w.push(b'e');
    } else if ends_double_consonant(w) && !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
        w.truncate(w.len() - 1);
    } else if measure(w, w.len()) == 1 && ends_cvc(w, w.len()) {
        w.push(b'e');
    }
}

fn step_1c(w: &mut [u8]) {
    let n = w.len();
    if n >= 1 && w[n - 1] == b'y' && contains_vowel(w, n - 1) {
        w[n - 1] = b'i';
    }
}

/// Applies the first (longest) matching suffix rule; if its m-condition on
/// the stem fails, the step does nothing further.
fn apply_rules(w: &mut Vec<u8>, min_measure: usize, rules: &[(&[u8], &[u8])]) {
    for &(suffix, replacement) in rules {
        if ends_with(w, suffix) {
            if measure(w, w.len() - suffix.len()) > min_measure {
                set_suffix(w, suffix, replacement);
            }
            return;
        }
    }
}

fn step_2(w: &mut Vec<u8>) {
    // Sorted longest-first so the longest matching suffix wins.
    const RULES: &[(&[u8], &[u8])] = &[
        (b"ization", b"ize"),
        (b"ational", b"ate"),
        (b"iveness", b"ive"),
        (b"fulness", b"ful"),
        (b"ousness", b"ous"),
        (b"tional", b"tion"),
        (b"biliti", b"ble"),
        (b"ation", b"ate"),
        (b"alism", b"al"),
        (b"aliti", b"al"),
        (b"iviti", b"ive"),
        (b"entli", b"ent"),
        (b"ousli", b"ous"),
        (b"enci", b"ence"),
        (b"anci", b"ance"),
        (b"izer", b"ize"),
        (b"abli", b"able"),
        (b"alli", b"al"),
        (b"ator", b"ate"),
        (b"eli", b"e"),
    ];
    apply_rules(w, 0, RULES);
}

fn step_3(w: &mut Vec<u8>) {
    const RULES: &[(&[u8], &[u8])] = &[
        (b"icate", b"ic"),
        (b"ative", b""),
        (b"alize", b"al"),
        (b"iciti", b"ic"),
        (b"ical", b"ic"),
        (b"ness", b""),
        (b"ful", b""),
    ];
    apply_rules(w, 0, RULES);
}

fn step_4(w: &mut Vec<u8>) {
    const RULES: &[(&[u8], &[u8])] = &[
        (b"ement", b""),
        (b"ance", b""),
        (b"ence", b""),
        (b"able", b""),
        (b"ible", b""),
        (b"ment", b""),
        (b"ant", b""),
        (b"ent", b""),
        (b"ism", b""),
        (b"ate", b""),
        (b"iti", b""),
        (b"ous", b""),
        (b"ive", b""),
        (b"ize", b""),
        (b"ion", b""),
        (b"al", b""),
        (b"er", b""),
        (b"ic", b""),
        (b"ou", b""),
    ];
    for &(suffix, replacement) in RULES {
        if ends_with(w, suffix) {
            let stem_len = w.len() - suffix.len();
            let condition = measure(w, stem_len) > 1
                && (suffix != b"ion" || matches!(w[stem_len - 1], b's' | b't'));
            if condition {
                set_suffix(w, suffix, replacement);
            }
            return;
        }
    }
}

fn step_5a(w: &mut Vec<u8>) {
    if !ends_with(w, b"e") {
        return;
    }
    let stem_len = w.len() - 1;
    let m = measure(w, stem_len);
    if m > 1 || (m == 1 && !ends_cvc(w, stem_len)) {
        w.truncate(stem_len);
    }
}

fn step_5b(w: &mut Vec<u8>) {
    if measure(w, w.len()) > 1 && ends_double_consonant(w) && w[w.len() - 1] == b'l' {
        w.truncate(w.len() - 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_counts_vc_sequences() {
        for (word, m) in [
            ("tr", 0),
            ("ee", 0),
            ("tree", 0),
            ("y", 0),
            ("by", 0),
            ("trouble", 1),
            ("oats", 1),
            ("trees", 1),
            ("ivy", 1),
            ("troubles", 2),
            ("private", 2),
            ("oaten", 2),
            ("orrery", 2),
        ] {
            assert_eq!(measure(word.as_bytes(), word.len()), m, "measure({word})");
        }
    }

    #[test]
    fn y_is_contextual() {
        let w = b"syzygy";
        // s C, y V, z C, y V, g C, y V
        let expected = [true, false, true, false, true, false];
        for (i, &e) in expected.iter().enumerate() {
            assert_eq!(is_consonant(w, i), e, "position {i}");
        }
    }

    #[test]
    fn paper_examples_for_each_step() {
        // 1a
        assert_eq!(stem("caresses"), "caress");
        assert_eq!(stem("ponies"), "poni");
        assert_eq!(stem("caress"), "caress");
        assert_eq!(stem("cats"), "cat");
        // 1b and its follow-up
        assert_eq!(stem("feed"), "feed");
        assert_eq!(stem("agreed"), "agre");
        assert_eq!(stem("plastered"), "plaster");
        assert_eq!(stem("bled"), "bled");
        assert_eq!(stem("motoring"), "motor");
        assert_eq!(stem("sing"), "sing");
        assert_eq!(stem("conflated"), "conflat");
        assert_eq!(stem("troubled"), "troubl");
        assert_eq!(stem("sized"), "size");
        assert_eq!(stem("hopping"), "hop");
        assert_eq!(stem("tanned"), "tan");
        assert_eq!(stem("falling"), "fall");
        assert_eq!(stem("hissing"), "hiss");
        assert_eq!(stem("fizzed"), "fizz");
        assert_eq!(stem("failing"), "fail");
        assert_eq!(stem("filing"), "file");
        // 1c
        assert_eq!(stem("happy"), "happi");
        assert_eq!(stem("sky"), "sky");
        // the pair called out in the pipeline docs
        assert_eq!(stem("looking"), "look");
    }

    #[test]
    fn non_lowercase_tokens_pass_through() {
        assert_eq!(stem("COVID"), "COVID");
        assert_eq!(stem("covid-19"), "covid-19");
        assert_eq!(stem(""), "");
    }

    #[test]
    fn never_lengthens_and_stays_lowercase() {
        for word in ["generalizations", "abcdefghij", "zzzz", "aeiou", "relational"] {
            let s = stem(word);
            assert!(s.len() <= word.len());
            assert!(s.bytes().all(|b| b.is_ascii_lowercase()));
        }
    }
}
