#pragma once

#include <cstdint>
#include <vector>

#include "objscale/types.h"

namespace objscale {

struct KnnOutlierOptions {
  int k = 10;
  double stddev_mult = 2.0;
};

// Mean distance from each point to its k nearest other points.
std::vector<double> MeanNeighborDistances(const PointCloud& cloud, int k);

// Statistical outlier removal: drops points whose mean k-NN distance exceeds
// mean + stddev_mult * stddev of that statistic over the cloud.
PointCloud RemoveOutliersKnn(const PointCloud& cloud, const KnnOutlierOptions& options = {});

struct IsolationForestOptions {
  int n_trees = 100;
  int subsample = 256;
  double contamination = 0.02;
  uint64_t seed = 0;
};

// Isolation forest anomaly scores in (0, 1]; larger is more anomalous.
std::vector<double> IsolationForestScores(const PointCloud& cloud,
                                          const IsolationForestOptions& options = {});

// Drops the floor(contamination * n) highest-scoring points.
PointCloud RemoveOutliersIForest(const PointCloud& cloud,
                                 const IsolationForestOptions& options = {});

// Average unsuccessful-search path length of a binary search tree on n items.
double AveragePathLength(double n);

}  // namespace objscale
