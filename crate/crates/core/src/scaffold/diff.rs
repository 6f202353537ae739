//! Line diffs (Myers), unified diff rendering and application, and a
//! diff3-style three-way merge.
//!
//! All text is LF-normalized before comparison.

use std::fmt::Write as _;

const CONTEXT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Equal(usize, usize),
    Delete(usize),
    Insert(usize),
}

/// Split into lines, each keeping its `\n` (the last may lack one).
fn lines(text: &str) -> Vec<&str> {
    text.split_inclusive('\n').collect()
}

pub fn normalize_newlines(text: &str) -> String {
    text.replace("\r\n", "\n")
}

/// Shortest edit script between `a` and `b`, deletions ordered before
/// insertions inside each changed region.
fn edit_script(a: &[&str], b: &[&str]) -> Vec<Op> {
    // Trim a common prefix and suffix; Myers runs on the middle only.
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let mid_a = &a[prefix..a.len() - suffix];
    let mid_b = &b[prefix..b.len() - suffix];

    let mut ops: Vec<Op> = (0..prefix).map(|i| Op::Equal(i, i)).collect();
    for op in myers(mid_a, mid_b) {
        ops.push(match op {
            Op::Equal(i, j) => Op::Equal(i + prefix, j + prefix),
            Op::Delete(i) => Op::Delete(i + prefix),
            Op::Insert(j) => Op::Insert(j + prefix),
        });
    }
    let (sa, sb) = (a.len() - suffix, b.len() - suffix);
    ops.extend((0..suffix).map(|t| Op::Equal(sa + t, sb + t)));
    reorder(ops)
}

fn reorder(ops: Vec<Op>) -> Vec<Op> {
    let mut out = Vec::with_capacity(ops.len());
    let mut dels = Vec::new();
    let mut ins = Vec::new();
    for op in ops {
        match op {
            Op::Delete(_) => dels.push(op),
            Op::Insert(_) => ins.push(op),
            Op::Equal(..) => {
                out.append(&mut dels);
                out.append(&mut ins);
                out.push(op);
            }
        }
    }
    out.append(&mut dels);
    out.append(&mut ins);
    out
}

fn myers(a: &[&str], b: &[&str]) -> Vec<Op> {
    let (n, m) = (a.len() as isize, b.len() as isize);
    if n == 0 {
        return (0..b.len()).map(Op::Insert).collect();
    }
    if m == 0 {
        return (0..a.len()).map(Op::Delete).collect();
    }
    let max = (n + m) as usize;
    let offset = max as isize;
    let mut v = vec![0isize; 2 * max + 2];
    let mut trace: Vec<Vec<isize>> = Vec::new();
    'outer: for d in 0..=max as isize {
        trace.push(v.clone());
        let mut k = -d;
        while k <= d {
            let idx = (k + offset) as usize;
            let mut x = if k == -d || (k != d && v[idx - 1] < v[idx + 1]) { v[idx + 1] } else { v[idx - 1] + 1 };
            let mut y = x - k;
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[idx] = x;
            if x >= n && y >= m {
                break 'outer;
            }
            k += 2;
        }
    }

    // Walk the trace backwards from (n, m).
    let mut ops = Vec::new();
    let (mut x, mut y) = (n, m);
    for d in (1..trace.len() as isize).rev() {
        let v = &trace[d as usize];
        let k = x - y;
        let idx = (k + offset) as usize;
        let prev_k = if k == -d || (k != d && v[idx - 1] < v[idx + 1]) { k + 1 } else { k - 1 };
        let prev_x = v[(prev_k + offset) as usize];
        let prev_y = prev_x - prev_k;
        while x > prev_x && y > prev_y {
            x -= 1;
            y -= 1;
            ops.push(Op::Equal(x as usize, y as usize));
        }
        if x == prev_x {
            y -= 1;
            ops.push(Op::Insert(y as usize));
        } else {
            x -= 1;
            ops.push(Op::Delete(x as usize));
        }
    }
    while x > 0 && y > 0 {
        x -= 1;
        y -= 1;
        ops.push(Op::Equal(x as usize, y as usize));
    }
    ops.reverse();
    ops
}

fn push_line(out: &mut String, tag: char, line: &str) {
    out.push(tag);
    out.push_str(line);
    if !line.ends_with('\n') {
        out.push_str("\n\\ No newline at end of file\n");
    }
}

fn range(start: usize, len: usize) -> String {
    // Empty ranges name the line before the hole, as GNU diff does.
    match len {
        0 => format!("{start},0"),
        1 => format!("{}", start + 1),
        _ => format!("{},{len}", start + 1),
    }
}

/// Unified diff with three lines of context; empty when the texts match.
pub fn unified_diff(old: &str, new: &str, old_label: &str, new_label: &str) -> String {
    let old = normalize_newlines(old);
    let new = normalize_newlines(new);
    let a = lines(&old);
    let b = lines(&new);
    let ops = edit_script(&a, &b);
    let changes: Vec<usize> = ops
        .iter()
        .enumerate()
        .filter(|(_, op)| !matches!(op, Op::Equal(..)))
        .map(|(i, _)| i)
        .collect();
    if changes.is_empty() {
        return String::new();
    }

    // Group change indices whose gap leaves at most 2*CONTEXT equal lines.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for &c in &changes {
        match groups.last_mut() {
            Some((_, end)) if c - *end <= 2 * CONTEXT + 1 => *end = c,
            _ => groups.push((c, c)),
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "--- {old_label}");
    let _ = writeln!(out, "+++ {new_label}");
    for (first, last) in groups {
        let lo = first.saturating_sub(CONTEXT);
        let hi = (last + CONTEXT + 1).min(ops.len());
        let slice = &ops[lo..hi];
        // Positions of the hunk in each file.
        let (a_start, b_start) = position_before(&ops, lo);
        let a_len = slice.iter().filter(|o| !matches!(o, Op::Insert(_))).count();
        let b_len = slice.iter().filter(|o| !matches!(o, Op::Delete(_))).count();
        let _ = writeln!(out, "@@ -{} +{} @@", range(a_start, a_len), range(b_start, b_len));
        for op in slice {
            match *op {
                Op::Equal(i, _) => push_line(&mut out, ' ', a[i]),
                Op::Delete(i) => push_line(&mut out, '-', a[i]),
                Op::Insert(j) => push_line(&mut out, '+', b[j]),
            }
        }
    }
    out
}

/// Number of lines of each file consumed before `ops[at]`.
fn position_before(ops: &[Op], at: usize) -> (usize, usize) {
    let mut a = 0;
    let mut b = 0;
    for op in &ops[..at] {
        match op {
            Op::Equal(..) => {
                a += 1;
                b += 1;
            }
            Op::Delete(_) => a += 1,
            Op::Insert(_) => b += 1,
        }
    }
    (a, b)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("patch does not apply: {0}")]
pub struct PatchError(pub String);

struct Hunk {
    old_start: usize,
    old_len: usize,
    lines: Vec<(char, String)>,
}

fn parse_range(s: &str) -> Result<(usize, usize), PatchError> {
    let bad = || PatchError(format!("malformed range `{s}`"));
    let (start, len) = match s.split_once(',') {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
        None => (s.parse().map_err(|_| bad())?, 1),
    };
    Ok((start, len))
}

fn parse_hunks(patch: &str) -> Result<Vec<Hunk>, PatchError> {
    let mut hunks: Vec<Hunk> = Vec::new();
    for raw in patch.split_inclusive('\n') {
        if hunks.is_empty() && (raw.starts_with("--- ") || raw.starts_with("+++ ")) {
            continue;
        }
        if let Some(rest) = raw.strip_prefix("@@ -") {
            let rest = rest.trim_end();
            let end = rest.find(" @@").ok_or_else(|| PatchError(format!("malformed hunk header `{raw}`")))?;
            let (old, new) = rest[..end]
                .split_once(" +")
                .ok_or_else(|| PatchError(format!("malformed hunk header `{raw}`")))?;
            let (old_start, old_len) = parse_range(old)?;
            parse_range(new)?;
            hunks.push(Hunk { old_start, old_len, lines: Vec::new() });
            continue;
        }
        let hunk = hunks.last_mut().ok_or_else(|| PatchError("content before first hunk".into()))?;
        if raw.starts_with('\\') {
            // "\ No newline at end of file" applies to the previous line.
            if let Some((_, prev)) = hunk.lines.last_mut() {
                if prev.ends_with('\n') {
                    prev.pop();
                }
            }
            continue;
        }
        let mut chars = raw.chars();
        let tag = chars.next().unwrap_or(' ');
        if !matches!(tag, ' ' | '-' | '+') {
            return Err(PatchError(format!("unexpected patch line `{}`", raw.trim_end())));
        }
        hunk.lines.push((tag, chars.as_str().to_string()));
    }
    Ok(hunks)
}

/// Apply a unified diff exactly (no fuzz, no offset search).
pub fn apply_patch(original: &str, patch: &str) -> Result<String, PatchError> {
    let original = normalize_newlines(original);
    let src = lines(&original);
    let mut out = String::with_capacity(original.len());
    let mut cursor = 0usize;
    for hunk in parse_hunks(patch)? {
        let start = if hunk.old_len == 0 { hunk.old_start } else { hunk.old_start.saturating_sub(1) };
        if start < cursor || start > src.len() {
            return Err(PatchError(format!("hunk at line {} out of range", hunk.old_start)));
        }
        for line in &src[cursor..start] {
            out.push_str(line);
        }
        cursor = start;
        for (tag, text) in &hunk.lines {
            match tag {
                ' ' | '-' => {
                    if src.get(cursor) != Some(&text.as_str()) {
                        return Err(PatchError(format!("context mismatch at line {}", cursor + 1)));
                    }
                    if *tag == ' ' {
                        out.push_str(text);
                    }
                    cursor += 1;
                }
                _ => out.push_str(text),
            }
        }
    }
    for line in &src[cursor..] {
        out.push_str(line);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeOutcome {
    pub text: String,
    pub conflicts: usize,
}

/// Map from each line of `base` to its matching line in `other`, if any.
fn matches(base: &[&str], other: &[&str]) -> Vec<Option<usize>> {
    let mut map = vec![None; base.len()];
    for op in edit_script(base, other) {
        if let Op::Equal(i, j) = op {
            map[i] = Some(j);
        }
    }
    map
}

/// Three-way merge of `ours` and `theirs` against their common ancestor.
///
/// Regions changed on one side only take that side; regions changed
/// identically on both sides merge cleanly; anything else becomes a
/// conflict block delimited by `<<<<<<<`, `=======` and `>>>>>>>` lines
/// carrying the given labels.
pub fn merge3(base: &str, ours: &str, theirs: &str, ours_label: &str, theirs_label: &str) -> MergeOutcome {
    let (base, ours, theirs) = (normalize_newlines(base), normalize_newlines(ours), normalize_newlines(theirs));
    let o = lines(&base);
    let a = lines(&ours);
    let b = lines(&theirs);
    let ma = matches(&o, &a);
    let mb = matches(&o, &b);

    let mut out = String::new();
    let mut conflicts = 0;
    let (mut i, mut j, mut k) = (0usize, 0usize, 0usize);
    loop {
        // Stable run: base, ours and theirs all agree line by line.
        let mut run = 0;
        while i + run < o.len() && ma[i + run] == Some(j + run) && mb[i + run] == Some(k + run) {
            run += 1;
        }
        for line in &o[i..i + run] {
            out.push_str(line);
        }
        i += run;
        j += run;
        k += run;

        let next = (i..o.len()).find(|&x| ma[x].is_some() && mb[x].is_some());
        let (oe, ae, be) = match next {
            Some(x) => (x, ma[x].unwrap(), mb[x].unwrap()),
            None => (o.len(), a.len(), b.len()),
        };
        if run == 0 && oe == i && ae == j && be == k {
            if next.is_none() {
                break;
            }
            continue;
        }
        let (oc, ac, bc) = (&o[i..oe], &a[j..ae], &b[k..be]);
        if ac == oc {
            bc.iter().for_each(|l| out.push_str(l));
        } else if bc == oc || ac == bc {
            ac.iter().for_each(|l| out.push_str(l));
        } else {
            conflicts += 1;
            // Lines both sides agree on at the edges stay outside the markers.
            let pre = ac.iter().zip(bc).take_while(|(x, y)| x == y).count();
            let post = ac[pre..].iter().rev().zip(bc[pre..].iter().rev()).take_while(|(x, y)| x == y).count();
            ac[..pre].iter().for_each(|l| out.push_str(l));
            let _ = writeln!(out, "<<<<<<< {ours_label}");
            for l in &ac[pre..ac.len() - post] {
                push_terminated(&mut out, l);
            }
            out.push_str("=======\n");
            for l in &bc[pre..bc.len() - post] {
                push_terminated(&mut out, l);
            }
            let _ = writeln!(out, ">>>>>>> {theirs_label}");
            ac[ac.len() - post..].iter().for_each(|l| out.push_str(l));
        }
        i = oe;
        j = ae;
        k = be;
        if next.is_none() {
            break;
        }
    }
    MergeOutcome { text: out, conflicts }
}

fn push_terminated(out: &mut String, line: &str) {
    out.push_str(line);
    if !line.ends_with('\n') {
        out.push('\n');
    }
}
