from qfpc.corpus import (GenConfig, corpus_generate, load_program, program_names,
                         program_settings, program_source)
from qfpc.operational import explore, initial_closure
from qfpc.syntax import is_finitary, size
from qfpc.typecheck import check_program

REQUIRED = {"unit", "coin", "half_diverge", "geom", "finitary_dup", "nat_add", "list_length",
            "teleport", "entangled_closure"}


def test_required_programs_shipped():
    assert REQUIRED <= set(program_names())
    assert len(program_names()) >= 20


def test_generate_examples():
    (t,) = corpus_generate(seed=0, count=1)
    assert check_program(t)
    progs = corpus_generate(seed=1, count=100)
    assert len(progs) == 100 and all(check_program(t) for t in progs)


def test_generator_is_deterministic():
    assert corpus_generate(seed=5, count=3) == corpus_generate(seed=5, count=3)


def test_generated_programs_quiesce_within_size():
    for t in corpus_generate(seed=2, count=40, cfg=GenConfig(depth=5, p_bang=0.4)):
        assert is_finitary(t)
        r = explore(initial_closure(t), budget=size(t))
        assert r.quiesced
        assert r.leaves["frontier"] == 0


def test_program_settings():
    assert program_settings(program_source("nat_add")) == {"approx": 2, "bang-len": 2, "mu-depth": 3}
    assert program_settings(program_source("coin")) == {}
    assert program_settings("# qfpc: approx=5\n()") == {"approx": 5}
    assert program_settings("()\n# qfpc: approx=5\n") == {}


def test_load_program():
    assert check_program(load_program("unit"))
