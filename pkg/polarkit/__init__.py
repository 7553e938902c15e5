"""Polar contour representation of instance masks: encode, decode, score, regress, assemble."""

EPSILON = 1e-6
