"""Training entry point for {{ project_name }}."""
import argparse

import torch
import torch.nn as nn

from seeding import set_seeds


def build_model():
    return nn.Sequential(nn.Linear(16, 32), nn.ReLU(), nn.Linear(32, 1))


def main():
    parser = argparse.ArgumentParser(description='{{ description }}')
    parser.add_argument('--seed', type=int, default={{ seed }})
    parser.add_argument('--epochs', type=int, default=2)
    args = parser.parse_args()

    set_seeds(args.seed)
    device = torch.device('cuda' if torch.cuda.is_available() else 'cpu')
    model = build_model().to(device)
    optimizer = torch.optim.SGD(model.parameters(), lr=0.01)
    loss_fn = nn.MSELoss()
    x = torch.randn(256, 16, device=device)
    y = torch.randn(256, 1, device=device)
    for epoch in range(args.epochs):
        optimizer.zero_grad()
        loss = loss_fn(model(x), y)
        loss.backward()
        optimizer.step()
        print(f'epoch {epoch} loss {loss.item():.6f}')


if __name__ == '__main__':
    main()
