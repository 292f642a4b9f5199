// Copyright 2026 The nwf authors
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

#ifndef NWF_THREADS_HPP_
#define NWF_THREADS_HPP_

#include <functional>

namespace nwf {

// Runs fn(i) for i in [0, n) across up to `threads` worker threads. Work
// items must be independent; any exception is captured and rethrown on the
// caller thread. With threads <= 1 the loop runs inline. Results must be
// written to per-item slots so the outcome is identical for any thread
// count; reductions belong on the caller side, in item order.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Thread count resolution: explicit value if > 0, otherwise the NWF_THREADS
// environment variable, otherwise 1.
int resolve_threads(int requested);

}  // namespace nwf

#endif  // NWF_THREADS_HPP_
