# Copyright (c) the ARIW Project Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Blind image watermarking with attack-robust residuals."""

from ._core import (
    AriwError,
    attack,
    bits_to_hex,
    canonical_config,
    embed,
    eval,
    extract,
    hex_to_bits,
    psnr,
    ssim,
    train,
)

__all__ = [
    "AriwError",
    "attack",
    "bits_to_hex",
    "canonical_config",
    "embed",
    "eval",
    "extract",
    "hex_to_bits",
    "psnr",
    "ssim",
    "train",
]
