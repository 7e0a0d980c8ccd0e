// Copyright (c) the pivotc authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PIVOTC_PARALLEL_HPP_
#define PIVOTC_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace pivotc {

// Number of worker threads: min(PIVOTC_THREADS, hardware concurrency),
// at least 1. Read once at first use.
int thread_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous index blocks,
// one per thread; every fn(i) writes only to position i of its outputs, so
// results are identical to the sequential loop regardless of thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pivotc

#endif  // PIVOTC_PARALLEL_HPP_
