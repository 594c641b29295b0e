from inspect import signature

import numpy as np


def _same(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(a, b)
    return a is b or a == b


class Base(object):
    """Class that deals with key-word arguments but is otherwise
    just an object.

    Subclasses store every constructor argument under an attribute of the
    same name so that `get_params` can rebuild them.
    """

    def __init__(self):
        super().__init__()

    @classmethod
    def _get_param_names(cls):
        """Get parameter names for the object"""
        init = cls.__init__
        if init is object.__init__:
            # No explicit constructor to introspect
            return []

        init_signature = signature(init)
        parameters = [
            p
            for p in init_signature.parameters.values()
            if p.name != "self" and p.kind not in (p.VAR_KEYWORD, p.VAR_POSITIONAL)
        ]
        parameters = set([p.name for p in parameters])

        # recurse
        for superclass in cls.__bases__:
            try:
                parameters.update(superclass._get_param_names())
            except AttributeError:
                # object doesn't have this method
                pass

        return parameters

    def get_params(self):
        """Get parameters from this object
        """
        return {p: getattr(self, p) for p in sorted(self._get_param_names())}

    def set_params(self, **params):
        """Immutable objects refuse updates; build a new object instead

        Raises
        ------
        ValueError : any parameter differs from the current value
        """
        current = self.get_params()
        for p in params:
            if p not in current:
                raise TypeError(
                    "set_params() got an unexpected keyword argument '{}'".format(p)
                )
            if not _same(params[p], current[p]):
                raise ValueError(
                    "Cannot update {}. Please create a new {}".format(
                        p, type(self).__name__
                    )
                )
        return self

    def copy(self, **params):
        """Copy of this object with some parameters replaced"""
        new_params = self.get_params()
        new_params.update(params)
        return type(self)(**new_params)

    def __repr__(self):
        params = ", ".join(
            "{}={!r}".format(k, v) for k, v in self.get_params().items()
        )
        return "{}({})".format(type(self).__name__, params)
