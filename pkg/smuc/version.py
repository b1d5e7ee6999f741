# pylint:disable=missing-docstring
version = "0.1.0"  # pylint:disable=invalid-name
