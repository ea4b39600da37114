"""Cross-border webshop turnover estimation: name linkage, web features, classifiers and bias-corrected totals."""
