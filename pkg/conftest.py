"""Pytest collection wiring for nose2-style parameterized tests.

The suite is written for nose2 (see nose2.cfg) and uses ``nose2.tools.params``,
which only records the argument sets on ``func.paramList``. pytest does not
understand that attribute, so expand each such method into one unittest method
per argument set, following nose2's semantics (non-tuple args are passed as a
single positional argument).
"""
import functools
import inspect
import unittest


def _make_case(func, args):
    @functools.wraps(func)
    def case(self):
        return func(self, *args)

    del case.__wrapped__
    return case


def _expand_params(cls):
    if cls.__dict__.get("_nose2_params_expanded"):
        return
    for klass in reversed(cls.__mro__):
        if not (isinstance(klass, type) and issubclass(klass, unittest.TestCase)):
            continue
        for name, func in list(vars(klass).items()):
            param_list = getattr(func, "paramList", None)
            if not inspect.isfunction(func) or param_list is None:
                continue
            for index, args in enumerate(param_list, start=1):
                if not isinstance(args, tuple):
                    args = (args,)
                setattr(cls, "%s_%d" % (name, index), _make_case(func, args))
            # Hide the unexpanded method from collection on this class.
            setattr(cls, name, None)
    cls._nose2_params_expanded = True


def pytest_pycollect_makeitem(collector, name, obj):
    if inspect.isclass(obj) and issubclass(obj, unittest.TestCase):
        _expand_params(obj)
    return None
