import math
import shutil
import subprocess
from pathlib import Path

import pytest

from redsimpl import cgen, frontend, interp
from redsimpl import polyhedron as ph
from redsimpl.errors import UnsupportedScalar

CORPUS = Path(__file__).resolve().parents[1] / "src" / "redsimpl" / "corpus"
CC = shutil.which("cc") or shutil.which("gcc")


def load(name):
    return frontend.parse((CORPUS / name).read_text())


def test_emission_is_stable():
    p = load("prefix_sum.red")
    a = cgen.emit_c(p).source
    b = cgen.emit_c(p).source
    assert a == b
    assert "main" in a and "#include <stdio.h>" in a


def test_every_corpus_program_emits():
    for f in sorted(CORPUS.glob("*.red")):
        unit = cgen.emit_c(frontend.parse(f.read_text()))
        assert unit.source.startswith("#include")


def test_rational_scalar_rejected():
    src = """param N;
input rat X : {[i] : 0 <= i and i < N};
output rat Y : {[i] : 0 <= i and i < N};
Y[i] = X[i];
"""
    with pytest.raises(UnsupportedScalar):
        cgen.emit_c(frontend.parse(src))


def _run_compiled(prog, n, inputs, tmp_path):
    unit = cgen.emit_c(prog)
    cfile = tmp_path / "prog.c"
    exe = tmp_path / "prog"
    cfile.write_text(unit.source)
    r = subprocess.run([CC, "-O1", "-o", str(exe), str(cfile)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    feed = [str(n)]
    for v in prog.inputs():
        for pt in ph.enumerate_points(v.domain, n):
            x = inputs[v.name][pt]
            feed.append(repr(float(x)) if v.scalar == "float" else str(x))
    out = subprocess.run([str(exe)], input=" ".join(feed), capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    lines = [l for l in out.stdout.splitlines() if l.strip()]
    return lines


@pytest.mark.skipif(CC is None, reason="no C toolchain")
@pytest.mark.parametrize("name,n", [("prefix_sum.red", 7), ("double_scan.red", 6), ("abft_mm.red", 5)])
def test_compiled_matches_interpreter_int(name, n, tmp_path):
    p = load(name)
    inputs = interp.random_inputs(p, n, 21)
    ref = interp.evaluate(p, inputs, n)
    lines = _run_compiled(p, n, inputs, tmp_path)
    for line, v in zip(lines, p.outputs()):
        got = [int(x) for x in line.split()]
        want = list(ref[v.name].values())
        assert got == want


@pytest.mark.skipif(CC is None, reason="no C toolchain")
def test_compiled_matches_interpreter_float(tmp_path):
    p = load("rna_iloops.red")
    n = 9
    inputs = interp.random_inputs(p, n, 5)
    ref = interp.evaluate(p, inputs, n)
    lines = _run_compiled(p, n, inputs, tmp_path)
    got = [float(x) for x in lines[0].split()]
    want = list(ref["Y"].values())
    assert len(got) == len(want)
    for a, b in zip(got, want):
        assert math.isclose(a, b, rel_tol=1e-9)


@pytest.mark.skipif(CC is None, reason="no C toolchain")
def test_compiled_simplified_variant_agrees(tmp_path):
    from redsimpl import simplify

    p = load("prefix_sum.red")
    res = simplify.simplify_all(p, budget_seconds=60)
    variant = res.variants[0].program
    n = 8
    inputs = interp.random_inputs(p, n, 3)
    ref = interp.evaluate(p, inputs, n)
    lines = _run_compiled(variant, n, inputs, tmp_path)
    got = [int(x) for x in lines[0].split()]
    assert got == list(ref["Y"].values())
