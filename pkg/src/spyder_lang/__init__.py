"""Spyder: a collection language with declared data invariants.

The compiler checks every procedure against the program's invariants and,
where the imperative code breaks them, synthesizes local patches that
restore them without undoing the programmer's own writes.
"""

__version__ = "0.1.0"
