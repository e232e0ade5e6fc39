"""Dilation toolkit for operator algebras: defects, Ando liftings, tree incidence algebras, covariant pairs."""
