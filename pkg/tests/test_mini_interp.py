import pytest

from passtune.backend.mini_interp import MiniRuntimeError, run_function
from passtune.backend.mini_ir import parse_function, verify_function


def _fn(text):
    fn = parse_function(text)
    verify_function(fn)
    return fn


def test_arithmetic_wraps_at_width():
    fn = _fn("define i32 @f(i32 %a) {\n%x = add i32 %a, 1\nret i32 %x\n}")
    assert run_function(fn, [1]) == 2
    assert run_function(fn, [2**31 - 1]) == -(2**31)


def test_i64_width_is_independent():
    fn = _fn("define i64 @f(i64 %a) {\n%x = mul i64 %a, %a\nret i64 %x\n}")
    assert run_function(fn, [2**32]) == 2**64 - 2**64  # wraps to 0
    assert run_function(fn, [3]) == 9


def test_icmp_and_branch():
    fn = _fn(
        "define i32 @f(i32 %a) {\nentry:\n%c = icmp slt i32 %a, 10\n"
        "br i1 %c, label %s, label %b\ns:\nret i32 1\nb:\nret i32 0\n}"
    )
    assert run_function(fn, [3]) == 1
    assert run_function(fn, [10]) == 0
    assert run_function(fn, [-5]) == 1  # signed comparison


def test_ret_i1_uses_signed_representative():
    fn = _fn("define i1 @f(i32 %a) {\n%c = icmp eq i32 %a, 0\nret i1 %c\n}")
    assert run_function(fn, [0]) == -1  # true at 1 bit is -1
    assert run_function(fn, [7]) == 0


def test_uninitialized_cell_reads_zero():
    fn = _fn(
        "define i32 @f() {\n%p = alloca i32\n%v = load i32, i32* %p\nret i32 %v\n}"
    )
    assert run_function(fn, []) == 0


def test_each_alloca_execution_is_a_fresh_cell():
    # the loop stores 9 into the cell, but a fresh cell is allocated on
    # every iteration, so the final load still reads the stored value of
    # the newest cell only
    fn = _fn(
        "define i32 @f(i32 %n) {\nentry:\nbr label %head\n"
        "head:\n%p = alloca i32\nstore i32 %n, i32* %p\n"
        "%v = load i32, i32* %p\n%c = icmp slt i32 %v, 0\n"
        "br i1 %c, label %head, label %exit\nexit:\nret i32 %v\n}"
    )
    assert run_function(fn, [5]) == 5


def test_memory_loop_accumulates():
    fn = _fn(
        "define i32 @f(i32 %n) {\nentry:\n%i = alloca i32\n%s = alloca i32\n"
        "store i32 0, i32* %i\nstore i32 0, i32* %s\nbr label %head\n"
        "head:\n%iv = load i32, i32* %i\n%c = icmp slt i32 %iv, %n\n"
        "br i1 %c, label %body, label %exit\n"
        "body:\n%sv = load i32, i32* %s\n%s2 = add i32 %sv, %iv\n"
        "store i32 %s2, i32* %s\n%i2 = add i32 %iv, 1\nstore i32 %i2, i32* %i\n"
        "br label %head\nexit:\n%r = load i32, i32* %s\nret i32 %r\n}"
    )
    assert run_function(fn, [5]) == 0 + 1 + 2 + 3 + 4
    assert run_function(fn, [0]) == 0
    assert run_function(fn, [-3]) == 0  # loop never entered


def test_step_budget_stops_runaway_loops():
    fn = _fn("define i32 @f() {\nentry:\nbr label %entry2\nentry2:\nbr label %entry2\n}")
    with pytest.raises(MiniRuntimeError, match="step budget"):
        run_function(fn, [], max_steps=50)


def test_argument_count_checked():
    fn = _fn("define i32 @f(i32 %a) {\nret i32 %a\n}")
    with pytest.raises(MiniRuntimeError, match="arguments"):
        run_function(fn, [])


def test_arguments_wrap_to_parameter_width():
    fn = _fn("define i32 @f(i32 %a) {\nret i32 %a\n}")
    assert run_function(fn, [2**32 + 7]) == 7
    assert run_function(fn, [2**31]) == -(2**31)
