"""Synthetic commit generator.

Produces paired old/new C-subset sources with a structural label signal:
fixing commits inject a real fix shape (a bounds-check conditional wrapped
around an indexed access, or an off-by-one index correction), non-fixing
commits apply label-neutral edits (identifier renames, added logging
calls, counter bumps) plus a sizeable comment block.  Comments never reach
the AST, so non-fixing commits look big in changed LOC but small in the
change graph -- mirroring the real-world pattern that fixes tend to be
tiny while routine churn is not, which is what makes review-effort metrics
meaningful at desk scale.

Everything is driven by one seed and is fully reproducible.
"""

from __future__ import annotations

import random

from .train import CommitSample, Dataset, FileChange

SIGNALS = ("bounds-check", "off-by-one", "mixed")

_TYPES = ("int", "long", "char")
_NOUNS = ("buf", "data", "queue", "cache", "slot", "frame", "packet", "chunk",
          "table", "ring")
_VERBS = ("process", "handle", "emit", "flush", "store", "scan", "consume",
          "decode", "publish", "drain")
_ADJS = ("max", "min", "next", "last", "init", "raw", "tmp", "cur", "old", "top")
_COMMENT_WORDS = ("refactor", "cleanup", "style", "docs", "notes", "todo",
                  "review", "tweak", "layout", "naming")


class _FunctionBuilder:
    """One random function; remembers an indexed statement to target fixes at."""

    def __init__(self, rng: random.Random, name: str):
        self.rng = rng
        self.name = name
        self.array = rng.choice(_NOUNS)
        self.length = rng.choice(_ADJS) + "_len"
        self.index = rng.choice(("i", "j", "k", "pos"))
        self.lines: list[str] = []
        self.fix_line: int | None = None       # index into self.lines
        self._build()

    def _ident(self) -> str:
        return self.rng.choice(_ADJS) + "_" + self.rng.choice(_NOUNS)

    def _simple_stmt(self) -> str:
        r = self.rng.random()
        if r < 0.35:
            return f"{self._ident()} = {self._ident()} + {self.rng.randint(1, 9)};"
        if r < 0.6:
            return f"{self.rng.choice(_VERBS)}({self._ident()}, {self.rng.randint(0, 99)});"
        if r < 0.8:
            return f"{self._ident()} = {self.rng.choice(_VERBS)}({self._ident()});"
        return f"if ({self._ident()} > {self.rng.randint(1, 50)}) {{ {self._ident()} = 0; }}"

    def _build(self) -> None:
        rng = self.rng
        add = self.lines.append
        add(f"int {self.name}(int {self.length}, int mode) {{")
        add(f"  int {self.array}[{rng.randint(8, 64)}];")
        add(f"  int {self.index} = 0;")
        for _ in range(rng.randint(1, 4)):
            add("  " + self._simple_stmt())
        # the loop a bounds-check fix will target
        add(f"  for ({self.index} = 0; {self.index} < {self.length}; {self.index}++) {{")
        self.fix_line = len(self.lines)
        add(f"    {rng.choice(_VERBS)}({self.array}[{self.index}]);")
        for _ in range(rng.randint(0, 2)):
            add("    " + self._simple_stmt())
        add("  }")
        for _ in range(rng.randint(1, 3)):
            add("  " + self._simple_stmt())
        # the trailing access an off-by-one fix will target
        self.tail_line = len(self.lines)
        add(f"  {self.rng.choice(_VERBS)}({self.array}[{self.length}]);")
        add("  return 0;")
        add("}")

    def source(self) -> str:
        return "\n".join(self.lines) + "\n"


def _apply_bounds_check(fn: _FunctionBuilder) -> list[str]:
    lines = list(fn.lines)
    target = lines[fn.fix_line].strip()
    indent = " " * (len(lines[fn.fix_line]) - len(lines[fn.fix_line].lstrip()))
    lines[fn.fix_line] = (f"{indent}if ({fn.index} < {fn.length}) "
                          f"{{ {target} }}")
    return lines

def _apply_off_by_one(fn: _FunctionBuilder) -> list[str]:
    lines = list(fn.lines)
    lines[fn.tail_line] = lines[fn.tail_line].replace(
        f"[{fn.length}]", f"[{fn.length} - 1]")
    return lines


def _apply_rename(rng: random.Random, lines: list[str]) -> list[str]:
    # consistently rename one frequently used identifier
    candidates = [a + "_" + n for a in _ADJS for n in _NOUNS]
    counts = [(sum(line.count(c) for line in lines), c) for c in candidates]
    counts = [x for x in counts if x[0] > 0]
    if not counts:
        return lines
    counts.sort(key=lambda x: (-x[0], x[1]))
    old_name = counts[0][1]
    new_name = old_name + "_v2"
    return [line.replace(old_name, new_name) for line in lines]


def _apply_logging(rng: random.Random, lines: list[str]) -> list[str]:
    out = list(lines)
    spot = rng.randint(1, len(out) - 2)
    out.insert(spot, f'  log_event("{rng.choice(_COMMENT_WORDS)}", {rng.randint(0, 9)});')
    return out


def _apply_counter(rng: random.Random, lines: list[str]) -> list[str]:
    out = list(lines)
    spot = rng.randint(1, len(out) - 2)
    name = rng.choice(_ADJS) + "_count"
    out.insert(spot, f"  {name} = {name} + 1;")
    return out


def _comment_block(rng: random.Random) -> list[str]:
    n = rng.randint(25, 70)
    return ["// " + " ".join(rng.choice(_COMMENT_WORDS) for _ in range(6))
            for _ in range(n)]


def generate_sample(rng: random.Random, sample_id: str, project: str,
                    label: int, signal: str) -> CommitSample:
    fn = _FunctionBuilder(rng, "fn_" + sample_id.replace("-", "_"))
    old_lines = list(fn.lines)
    if label == 1:
        if signal == "mixed":
            signal = rng.choice(("bounds-check", "off-by-one"))
        if signal == "bounds-check":
            new_lines = _apply_bounds_check(fn)
        else:
            new_lines = _apply_off_by_one(fn)
    else:
        edit = rng.choice((_apply_rename, _apply_logging, _apply_counter))
        new_lines = edit(rng, old_lines)
        # bulk of a non-fixing commit is chatter: a doc/comment block
        spot = rng.randint(0, 1)
        block = _comment_block(rng)
        new_lines = new_lines[:spot] + block + new_lines[spot:]
    old_src = "\n".join(old_lines) + "\n"
    new_src = "\n".join(new_lines) + "\n"
    return CommitSample(sample_id, project,
                        label, (FileChange("src/main.c", old_src, new_src),))


def generate_dataset(n: int, signal: str = "mixed", seed: int = 42) -> Dataset:
    """n balanced samples spread across ~n/20 projects, deterministic per seed."""
    if n < 2:
        raise ValueError(f"need n >= 2 samples, got {n}")
    if signal not in SIGNALS:
        raise ValueError(f"signal must be one of {SIGNALS}, got {signal!r}")
    rng = random.Random(seed)
    n_projects = max(2, min(40, n // 20 or 2))
    labels = [1] * ((n + 1) // 2) + [0] * (n // 2)
    rng.shuffle(labels)
    samples = []
    for i, label in enumerate(labels):
        project = f"proj{rng.randrange(n_projects):02d}"
        samples.append(generate_sample(rng, f"synth-{i:04d}", project, label, signal))
    return Dataset(samples)
