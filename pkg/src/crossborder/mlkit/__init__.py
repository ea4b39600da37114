"""Classifiers, cross-validation and grid search written against numpy only."""

from .base import Classifier, sample_weights
from .cv import (ALGORITHMS, GRIDS, CvResult, LabeledSet, ModelSpec, cross_validate, expand_grid, grid_search,
                 load_model, read_grid_file, save_model, select_best, stratified_kfold, train, write_grid_file,
                 write_report)
from .linear import KNN, LDA, QDA, LogisticRegression, MultinomialNB
from .metrics import ConfusionCounts, precision_recall_f1, scores
from .svm import SVC
from .trees import AdaBoost, DecisionTree, GradientBoosting, RandomForest
