#!/usr/bin/env python3
"""
Test client for the meshcast MCP server.
"""

import asyncio
import sys
import tempfile

from mcp.client.session import ClientSession
from mcp.client.stdio import StdioServerParameters, stdio_client


async def main():
    """Run a smoke test of the meshcast MCP server."""
    server_params = StdioServerParameters(
        command="python",
        args=["-m", "meshcast", "serve", "--stdio"]
    )

    print("Starting client...")

    async with stdio_client(server_params) as (read, write):
        async with ClientSession(read, write) as session:
            print("Initializing session...")
            await session.initialize()
            print("Session initialized!")

            tools = await session.list_tools()
            print(f"Available tools: {[tool.name for tool in tools.tools]}")

            print("\nEstimating FLOPs of a small M-Net...")
            result = await session.call_tool("estimate_flops", {
                "config": {"depth": 2, "base_channels": 8, "image_size": [32, 32], "frames_T": 4},
            })
            print(f"FLOPs: {result}")

            with tempfile.TemporaryDirectory() as out_dir:
                print("\nGenerating two synthetic cases...")
                result = await session.call_tool("generate_synthetic", {
                    "out_dir": out_dir, "n_cases": 2, "depth": 8, "size": 32,
                })
                print(f"Synthetic cases: {result}")


if __name__ == "__main__":
    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        sys.exit(0)
