# Tests for inverse-regression-lib
