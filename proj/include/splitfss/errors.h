/*
 * Copyright 2026 The splitfss Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Exception hierarchy shared by every splitfss module. Each failure mode named
// in the protocol contract gets its own type so callers (and tests) can catch
// exactly the condition they care about.

#ifndef SPLITFSS_ERRORS_H_
#define SPLITFSS_ERRORS_H_

#include <stdexcept>
#include <string>

namespace splitfss {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SPLITFSS_DEFINE_ERROR(Name)       \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// ring / sharing
SPLITFSS_DEFINE_ERROR(OverflowError);
SPLITFSS_DEFINE_ERROR(ConfigMismatch);
SPLITFSS_DEFINE_ERROR(InvalidConfig);
SPLITFSS_DEFINE_ERROR(PartyMismatch);
SPLITFSS_DEFINE_ERROR(ShapeMismatch);

// correlated randomness
SPLITFSS_DEFINE_ERROR(TripleExhausted);
SPLITFSS_DEFINE_ERROR(KeyExhausted);

// transport
SPLITFSS_DEFINE_ERROR(ChannelClosed);
SPLITFSS_DEFINE_ERROR(FrameCorrupt);
SPLITFSS_DEFINE_ERROR(Timeout);

// protocol
SPLITFSS_DEFINE_ERROR(SyncMismatch);
SPLITFSS_DEFINE_ERROR(ProtocolError);

// datasets
SPLITFSS_DEFINE_ERROR(BadMagic);
SPLITFSS_DEFINE_ERROR(TruncatedFile);

#undef SPLITFSS_DEFINE_ERROR

}  // namespace splitfss

#endif  // SPLITFSS_ERRORS_H_
