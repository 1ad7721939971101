"""Price-aware recommendation on a user/item/category/price graph."""

__version__ = "0.1.0"
